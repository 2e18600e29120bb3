use serde::Serialize;

use super::solver::{check_finite, step_plan, Stepper};
use super::{Field, Grid1D, PdeError};
use crate::estimate::InitialDatum;
use crate::poly::Polynomial;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrontSample {
    pub t: f64,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontFit {
    /// Linear speed removed before fitting, `2√f'(0)`.
    pub speed: f64,
    /// Coefficient of `log t`.
    pub log_slope: f64,
    pub intercept: f64,
    pub fit_window: (f64, f64),
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Rightmost crossing of `level`, linearly interpolated.
pub fn front_location(field: &Field, level: f64) -> Result<f64, PdeError> {
    let v = &field.values;
    let dx = field.grid.dx();
    for i in (0..v.len() - 1).rev() {
        let (a, b) = (v[i] - level, v[i + 1] - level);
        if a == 0.0 && b != 0.0 {
            return Ok(field.grid.x(i));
        }
        if a * b < 0.0 || (b == 0.0 && i + 2 == v.len()) {
            return Ok(field.grid.x(i) + a / (a - b) * dx);
        }
    }
    Err(PdeError::NoCrossing { level })
}

/// Comoving front run: the domain `[X - half_width, X + half_width]` is shifted
/// by whole cells every `regrid_every`; new cells take the limiting states
/// of the datum, evolved by the reaction.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontConfig {
    pub dx: f64,
    pub dt: Option<f64>,
    pub half_width: f64,
    pub regrid_every: f64,
    pub sample_every: f64,
    pub level: f64,
    pub t_end: f64,
    pub reaction_substeps: usize,
}

impl Default for FrontConfig {
    fn default() -> Self {
        Self {
            dx: 0.05,
            dt: None,
            half_width: 40.0,
            regrid_every: 1.0,
            sample_every: 1.0,
            level: 0.5,
            t_end: 200.0,
            reaction_substeps: 1,
        }
    }
}

/// Front positions `X(t)` at `t = 0, sample_every, 2 sample_every, ..`.
pub fn front_series(
    f: &Polynomial,
    g: &InitialDatum,
    cfg: &FrontConfig,
) -> Result<Vec<FrontSample>, PdeError> {
    if !(cfg.t_end.is_finite() && cfg.t_end >= 0.0) {
        return Err(PdeError::Time(cfg.t_end));
    }
    if !(cfg.sample_every > 0.0) {
        return Err(PdeError::Time(cfg.sample_every));
    }
    let cells = 2 * (cfg.half_width / cfg.dx).round().max(8.0) as usize;
    let width = cells as f64 * cfg.dx;
    let mut grid = Grid1D::new(-0.5 * width, 0.5 * width, cells + 1)?;
    let dx = grid.dx();
    let (steps, dt) = step_plan(cfg.sample_every, cfg.dt.unwrap_or(0.25 * dx * dx));
    let mut stepper = Stepper::new(f, grid.n_points(), dx, dt, cfg.reaction_substeps)?;
    let mut u: Vec<f64> = grid.points().map(|x| g.grid_value(x)).collect();
    let mut shifted = vec![0.0; u.len()];
    // states at -inf and +inf, which evolve by the reaction alone
    let (left, right) = g.limits();
    let mut limits = [left, right];

    let samples = (cfg.t_end / cfg.sample_every + 1e-9).floor() as usize;
    let regrid_stride = ((cfg.regrid_every / cfg.sample_every).round() as usize).max(1);
    let mut series = Vec::with_capacity(samples + 1);
    let field = |grid: Grid1D, t: f64, u: &[f64]| Field {
        grid,
        t,
        values: u.to_vec(),
    };
    series.push(FrontSample {
        t: 0.0,
        x: front_location(&field(grid, 0.0, &u), cfg.level)?,
    });
    for k in 1..=samples {
        for _ in 0..steps {
            stepper.step(&mut u);
            stepper.react(&mut limits, dt);
        }
        let t = k as f64 * cfg.sample_every;
        check_finite(&u, t, dt)?;
        let x = front_location(&field(grid, t, &u), cfg.level)?;
        series.push(FrontSample { t, x });
        if k % regrid_stride == 0 {
            let center = 0.5 * (grid.x_min() + grid.x_max());
            let shift = ((x - center) / dx).round() as isize;
            if shift != 0 {
                let n = u.len() as isize;
                for (i, slot) in shifted.iter_mut().enumerate() {
                    let j = i as isize + shift;
                    *slot = if j < 0 {
                        limits[0]
                    } else if j >= n {
                        limits[1]
                    } else {
                        u[j as usize]
                    };
                }
                std::mem::swap(&mut u, &mut shifted);
                grid = grid.shifted(shift);
            }
        }
    }
    Ok(series)
}

fn window(
    series: &[FrontSample],
    (t_start, t_end): (f64, f64),
) -> Result<Vec<FrontSample>, PdeError> {
    let eps = 1e-9 * t_end.abs().max(1.0);
    let picked: Vec<FrontSample> = series
        .iter()
        .copied()
        .filter(|s| s.t >= t_start - eps && s.t <= t_end + eps)
        .collect();
    if picked.len() < 10 || !(t_start < t_end) {
        return Err(PdeError::Window {
            t_start,
            t_end,
            samples: picked.len(),
        });
    }
    Ok(picked)
}

/// Ordinary least squares `y = slope * x + intercept`, with the RMS residual.
fn least_squares(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Fits `X(t) - 2√f'(0) t = log_slope * log t + intercept` over the window.
pub fn bramson_fit(
    series: &[FrontSample],
    f_prime_0: f64,
    fit_window: (f64, f64),
) -> Result<FrontFit, PdeError> {
    if !(f_prime_0 > 0.0) {
        return Err(PdeError::Slope(f_prime_0));
    }
    let picked = window(series, fit_window)?;
    if picked.iter().any(|s| s.t <= 0.0) {
        return Err(PdeError::Window {
            t_start: fit_window.0,
            t_end: fit_window.1,
            samples: picked.len(),
        });
    }
    let speed = 2.0 * f_prime_0.sqrt();
    let points: Vec<(f64, f64)> = picked
        .iter()
        .map(|s| (s.t.ln(), s.x - speed * s.t))
        .collect();
    let (log_slope, intercept, residual) = least_squares(&points);
    Ok(FrontFit {
        speed,
        log_slope,
        intercept,
        fit_window,
        residual,
    })
}

/// Least-squares slope of `X(t)` over the window.
pub fn pushed_speed(series: &[FrontSample], fit_window: (f64, f64)) -> Result<f64, PdeError> {
    let picked = window(series, fit_window)?;
    let points: Vec<(f64, f64)> = picked.iter().map(|s| (s.t, s.x)).collect();
    Ok(least_squares(&points).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{heat_exact, solve, SolveConfig};

    fn synthetic(x: impl Fn(f64) -> f64) -> Vec<FrontSample> {
        (0..=200)
            .map(|k| FrontSample {
                t: k as f64,
                x: x(k as f64),
            })
            .collect()
    }

    #[test]
    fn fits_recover_their_generators() {
        let s = synthetic(|t| 2.0 * t - 1.5 * t.max(1e-300).ln() + 3.0);
        let fit = bramson_fit(&s, 1.0, (20.0, 200.0)).unwrap();
        assert!((fit.log_slope + 1.5).abs() < 1e-10);
        assert!((fit.intercept - 3.0).abs() < 1e-9);
        assert!(fit.residual < 1e-9);
        let s = synthetic(|t| 3.0 * t + 1.0);
        assert!((pushed_speed(&s, (20.0, 100.0)).unwrap() - 3.0).abs() < 1e-12);
        assert!(matches!(
            pushed_speed(&s, (20.0, 25.0)),
            Err(PdeError::Window { samples: 6, .. })
        ));
    }

    #[test]
    fn heat_profile_front_at_origin() {
        let grid = Grid1D::with_spacing(-10.0, 10.0, 0.1).unwrap();
        let values = grid.points().map(|x| heat_exact(1.0, x).unwrap()).collect();
        let field = Field {
            grid,
            t: 1.0,
            values,
        };
        assert!(front_location(&field, 0.5).unwrap().abs() < grid.dx());
        let step = Field {
            grid,
            t: 0.0,
            values: grid
                .points()
                .map(|x| InitialDatum::step().grid_value(x))
                .collect(),
        };
        assert!(front_location(&step, 0.5).unwrap().abs() < 1e-12);
        let flat = Field {
            grid,
            t: 0.0,
            values: vec![0.2; grid.n_points()],
        };
        assert!(matches!(
            front_location(&flat, 0.5),
            Err(PdeError::NoCrossing { .. })
        ));
    }

    #[test]
    fn comoving_matches_fixed_domain() {
        let f = Polynomial::new(vec![0.0, 1.0, -1.0]).unwrap();
        let cfg = FrontConfig {
            dx: 0.1,
            t_end: 20.0,
            ..FrontConfig::default()
        };
        let moving = front_series(&f, &InitialDatum::step(), &cfg).unwrap();
        let grid = Grid1D::with_spacing(-80.0, 120.0, 0.1).unwrap();
        let fixed = solve(
            &f,
            &InitialDatum::step(),
            grid,
            20.0,
            &SolveConfig::default(),
        )
        .unwrap();
        let x_fixed = front_location(&fixed.field, 0.5).unwrap();
        let x_moving = moving.last().unwrap().x;
        assert!(
            (x_fixed - x_moving).abs() < cfg.dx,
            "{x_fixed} vs {x_moving}"
        );
        assert!(x_moving > 30.0 && x_moving < 40.0);
    }
}
