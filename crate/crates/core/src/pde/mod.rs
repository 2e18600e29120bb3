//! Finite-difference oracle for `u_t = u_xx + f(u)` on an interval.
//!
//! Strang splitting: half a reaction step by RK4, one Crank-Nicolson
//! diffusion step with zero-flux boundaries, another half reaction step. With
//! `dt <= dx^2` the diffusion step is monotone, and for `f(0) = f(1) = 0` the
//! RK4 map is increasing and fixes 0 and 1, so `[0, 1]` is invariant without
//! any clamping.

mod front;
mod solver;

pub use front::{
    bramson_fit, front_location, front_series, pushed_speed, FrontConfig, FrontFit, FrontSample,
};
pub use solver::{solve, Solution, SolveConfig, Stepper};

use std::io::{self, Write};

use thiserror::Error;

use crate::numfmt::g17;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PdeError {
    #[error(
        "grid needs x_min < x_max and at least 16 points (got [{x_min}, {x_max}] with {n_points})"
    )]
    Grid {
        x_min: f64,
        x_max: f64,
        n_points: usize,
    },
    #[error("time must be finite and non-negative, got {0}")]
    Time(f64),
    #[error("time step {dt} is not positive")]
    Step { dt: f64 },
    #[error("time step {dt} exceeds dx^2 = {limit}; the diffusion step would not be monotone")]
    NotMonotone { dt: f64, limit: f64 },
    #[error("solution became non-finite at t = {t}; retry with dt <= {suggested_dt:e}")]
    Unstable { t: f64, suggested_dt: f64 },
    #[error("no crossing of level {level} found")]
    NoCrossing { level: f64 },
    #[error("fit window [{t_start}, {t_end}] holds {samples} samples, at least 10 are needed")]
    Window {
        t_start: f64,
        t_end: f64,
        samples: usize,
    },
    #[error("f'(0) = {0} must be positive for a pulled front")]
    Slope(f64),
    #[error("{0}")]
    Datum(String),
}

/// Uniform grid `x_min = x_0 < ... < x_{n-1} = x_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self, PdeError> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) || n_points < 16 {
            return Err(PdeError::Grid {
                x_min,
                x_max,
                n_points,
            });
        }
        Ok(Self {
            x_min,
            x_max,
            n_points,
        })
    }

    /// Grid on `[x_min, x_max]` with spacing as close to `dx` as the endpoints allow.
    pub fn with_spacing(x_min: f64, x_max: f64, dx: f64) -> Result<Self, PdeError> {
        let cells = ((x_max - x_min) / dx).round().max(1.0) as usize;
        Self::new(x_min, x_max, cells + 1)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n_points - 1 {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.x(i))
    }

    /// The same spacing shifted by a whole number of cells.
    pub fn shifted(&self, cells: isize) -> Grid1D {
        let dx = self.dx();
        let offset = cells as f64 * dx;
        Grid1D {
            x_min: self.x_min + offset,
            x_max: self.x_max + offset,
            n_points: self.n_points,
        }
    }
}

/// Solution values on a grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid1D,
    pub t: f64,
    pub values: Vec<f64>,
}

impl Field {
    /// Linear interpolation, constant beyond the ends.
    pub fn at(&self, x: f64) -> f64 {
        let n = self.grid.n_points;
        if x <= self.grid.x_min {
            return self.values[0];
        }
        if x >= self.grid.x_max {
            return self.values[n - 1];
        }
        let s = (x - self.grid.x_min) / self.grid.dx();
        let i = (s.floor() as usize).min(n - 2);
        let w = s - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Trapezoidal integral.
    pub fn integral(&self) -> f64 {
        let n = self.values.len();
        let inner: f64 = self.values[1..n - 1].iter().sum();
        self.grid.dx() * (inner + 0.5 * (self.values[0] + self.values[n - 1]))
    }
}

/// `½ erfc(x / (2√t))`, the solution of `u_t = u_xx` from `1(x < 0)`.
pub fn heat_exact(t: f64, x: f64) -> Result<f64, PdeError> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(PdeError::Time(t));
    }
    Ok(0.5 * libm::erfc(x / (2.0 * t.sqrt())))
}

/// Writes `t,x,u` rows for each field.
pub fn write_fields_csv<W: Write + ?Sized>(out: &mut W, fields: &[Field]) -> io::Result<()> {
    writeln!(out, "t,x,u")?;
    for field in fields {
        for (x, u) in field.grid.points().zip(&field.values) {
            writeln!(out, "{},{},{}", g17(field.t), g17(x), g17(*u))?;
        }
    }
    Ok(())
}

/// Writes `t,X` rows.
pub fn write_front_csv<W: Write + ?Sized>(out: &mut W, series: &[FrontSample]) -> io::Result<()> {
    writeln!(out, "t,X")?;
    for s in series {
        writeln!(out, "{},{}", g17(s.t), g17(s.x))?;
    }
    Ok(())
}
