use super::{Field, Grid1D, PdeError};
use crate::estimate::InitialDatum;
use crate::poly::Polynomial;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveConfig {
    /// Defaults to `0.25 dx^2`.
    pub dt: Option<f64>,
    /// RK4 substeps per half reaction step.
    pub reaction_substeps: usize,
    /// Keep a snapshot every this much time, besides the initial and final fields.
    pub snapshot_every: Option<f64>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            dt: None,
            reaction_substeps: 1,
            snapshot_every: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub field: Field,
    /// Snapshots in time order; empty unless requested.
    pub snapshots: Vec<Field>,
    pub dt: f64,
    pub steps: usize,
}

/// One Strang step of fixed size on a fixed grid.
#[derive(Debug, Clone)]
pub struct Stepper {
    f: Polynomial,
    dt: f64,
    substeps: usize,
    r: f64,
    // forward-eliminated Thomas coefficients of (I - dt/2 L)
    c_prime: Vec<f64>,
    inv_denom: Vec<f64>,
    rhs: Vec<f64>,
}

impl Stepper {
    pub fn new(
        f: &Polynomial,
        n_points: usize,
        dx: f64,
        dt: f64,
        substeps: usize,
    ) -> Result<Self, PdeError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(PdeError::Step { dt });
        }
        if dt > dx * dx * (1.0 + 1e-12) {
            return Err(PdeError::NotMonotone { dt, limit: dx * dx });
        }
        let r = dt / (dx * dx);
        let n = n_points;
        // rows: [1+r, -r], [-r/2, 1+r, -r/2], ..., [-r, 1+r]
        let lower = |i: usize| if i == n - 1 { -r } else { -0.5 * r };
        let upper = |i: usize| if i == 0 { -r } else { -0.5 * r };
        let diag = 1.0 + r;
        let mut c_prime = vec![0.0; n];
        let mut inv_denom = vec![0.0; n];
        inv_denom[0] = 1.0 / diag;
        c_prime[0] = upper(0) * inv_denom[0];
        for i in 1..n {
            inv_denom[i] = 1.0 / (diag - lower(i) * c_prime[i - 1]);
            if i < n - 1 {
                c_prime[i] = upper(i) * inv_denom[i];
            }
        }
        Ok(Self {
            f: f.clone(),
            dt,
            substeps: substeps.max(1),
            r,
            c_prime,
            inv_denom,
            rhs: vec![0.0; n],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub(super) fn react(&self, u: &mut [f64], h: f64) {
        let h = h / self.substeps as f64;
        let f = &self.f;
        for v in u.iter_mut() {
            let mut y = *v;
            for _ in 0..self.substeps {
                let k1 = f.eval(y);
                let k2 = f.eval(y + 0.5 * h * k1);
                let k3 = f.eval(y + 0.5 * h * k2);
                let k4 = f.eval(y + h * k3);
                y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
            *v = y;
        }
    }

    fn diffuse(&mut self, u: &mut [f64]) {
        let n = u.len();
        let r = self.r;
        self.rhs[0] = (1.0 - r) * u[0] + r * u[1];
        for i in 1..n - 1 {
            self.rhs[i] = 0.5 * r * (u[i - 1] + u[i + 1]) + (1.0 - r) * u[i];
        }
        self.rhs[n - 1] = r * u[n - 2] + (1.0 - r) * u[n - 1];
        // lower coefficients are -r/2 except the last row's -r
        let lower = |i: usize| if i == n - 1 { -r } else { -0.5 * r };
        u[0] = self.rhs[0] * self.inv_denom[0];
        for i in 1..n {
            u[i] = (self.rhs[i] - lower(i) * u[i - 1]) * self.inv_denom[i];
        }
        for i in (0..n - 1).rev() {
            u[i] -= self.c_prime[i] * u[i + 1];
        }
    }

    pub fn step(&mut self, u: &mut [f64]) {
        let half = 0.5 * self.dt;
        if !self.f.is_zero() {
            self.react(u, half);
        }
        self.diffuse(u);
        if !self.f.is_zero() {
            self.react(u, half);
        }
    }
}

/// Steps of size at most `dt_max` that land exactly on `duration`.
pub(super) fn step_plan(duration: f64, dt_max: f64) -> (usize, f64) {
    if duration == 0.0 {
        return (0, dt_max);
    }
    let n = (duration / dt_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (n, duration / n as f64)
}

pub(super) fn check_finite(u: &[f64], t: f64, dt: f64) -> Result<(), PdeError> {
    if u.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(PdeError::Unstable {
            t,
            suggested_dt: dt / 4.0,
        })
    }
}

/// Solves `u_t = u_xx + f(u)`, `u(0) = g`, with zero-flux boundaries.
pub fn solve(
    f: &Polynomial,
    g: &InitialDatum,
    grid: Grid1D,
    t_end: f64,
    cfg: &SolveConfig,
) -> Result<Solution, PdeError> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(PdeError::Time(t_end));
    }
    let dx = grid.dx();
    let dt_max = cfg.dt.unwrap_or(0.25 * dx * dx);
    let (steps, dt) = step_plan(t_end, dt_max);
    let mut stepper = Stepper::new(f, grid.n_points(), dx, dt, cfg.reaction_substeps)?;
    let mut u: Vec<f64> = grid.points().map(|x| g.grid_value(x)).collect();

    let snapshot_stride = cfg
        .snapshot_every
        .map(|every| ((every / dt).round() as usize).max(1));
    let mut snapshots = Vec::new();
    if snapshot_stride.is_some() {
        snapshots.push(Field {
            grid,
            t: 0.0,
            values: u.clone(),
        });
    }
    for k in 1..=steps {
        stepper.step(&mut u);
        let t = if k == steps { t_end } else { k as f64 * dt };
        if k % 64 == 0 || k == steps {
            check_finite(&u, t, dt)?;
        }
        if let Some(stride) = snapshot_stride {
            if k % stride == 0 && k != steps {
                snapshots.push(Field {
                    grid,
                    t,
                    values: u.clone(),
                });
            }
        }
    }
    let field = Field {
        grid,
        t: t_end,
        values: u,
    };
    if snapshot_stride.is_some() && steps > 0 {
        snapshots.push(field.clone());
    }
    Ok(Solution {
        field,
        snapshots,
        dt,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::heat_exact;

    fn poly(c: &[f64]) -> Polynomial {
        Polynomial::new(c.to_vec()).unwrap()
    }

    #[test]
    fn heat_examples() {
        let grid = Grid1D::with_spacing(-12.0, 12.0, 0.02).unwrap();
        let s = solve(
            &Polynomial::zero(),
            &InitialDatum::step(),
            grid,
            1.0,
            &SolveConfig::default(),
        )
        .unwrap();
        assert!((s.field.at(0.0) - 0.5).abs() < 1e-3);
        assert!((s.field.at(2.0) - 0.078_649_603_5).abs() < 1e-3);
    }

    #[test]
    fn flat_cubic_blow_up() {
        let grid = Grid1D::with_spacing(-2.0, 2.0, 0.05).unwrap();
        let s = solve(
            &poly(&[0.0, 0.0, 0.0, 1.0]),
            &InitialDatum::Constant(1.0),
            grid,
            0.1,
            &SolveConfig::default(),
        )
        .unwrap();
        let exact = 1.0 / 0.8f64.sqrt();
        assert!(s.field.values.iter().all(|v| (v - exact).abs() < 1e-9));
    }

    fn step_heat_error(dx: f64) -> f64 {
        let grid = Grid1D::with_spacing(-10.0, 10.0, dx).unwrap();
        let s = solve(
            &Polynomial::zero(),
            &InitialDatum::step(),
            grid,
            1.0,
            &SolveConfig::default(),
        )
        .unwrap();
        [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]
            .iter()
            .map(|&x| (s.field.at(x) - heat_exact(1.0, x).unwrap()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn second_order_convergence() {
        let coarse = step_heat_error(0.1);
        let fine = step_heat_error(0.05);
        assert!(coarse / fine >= 3.5, "ratio {}", coarse / fine);
    }

    #[test]
    fn neumann_conserves_mass() {
        let grid = Grid1D::with_spacing(-5.0, 5.0, 0.05).unwrap();
        let g = InitialDatum::Interval { a: -4.0, b: 1.0 };
        let start = Field {
            grid,
            t: 0.0,
            values: grid.points().map(|x| g.grid_value(x)).collect(),
        };
        let s = solve(&Polynomial::zero(), &g, grid, 1.0, &SolveConfig::default()).unwrap();
        let drift = (s.field.integral() - start.integral()).abs() / start.integral();
        assert!(drift < 1e-6, "drift {drift:e}");
    }

    #[test]
    fn invariant_region_without_clamping() {
        let grid = Grid1D::with_spacing(-10.0, 10.0, 0.1).unwrap();
        let cfg = SolveConfig {
            snapshot_every: Some(0.25),
            ..SolveConfig::default()
        };
        let nonlinearities = [
            poly(&[0.0, 1.0, -1.0]),
            poly(&[0.0, -1.0, 3.0, -2.0]),
            poly(&[0.0, 5.0, -2.0, -3.0]),
            poly(&[0.0, 0.0, 4.0, -4.0]),
        ];
        for f in &nonlinearities {
            for g in [
                InitialDatum::step(),
                InitialDatum::Interval { a: -1.0, b: 1.0 },
                InitialDatum::Constant(1.0),
            ] {
                let s = solve(f, &g, grid, 4.0, &cfg).unwrap();
                for snap in &s.snapshots {
                    assert!(
                        snap.values.iter().all(|v| (-1e-8..=1.0 + 1e-8).contains(v)),
                        "{f} {g} t={}",
                        snap.t
                    );
                }
            }
        }
    }

    #[test]
    fn snapshots_and_steps() {
        let grid = Grid1D::with_spacing(-4.0, 4.0, 0.1).unwrap();
        let cfg = SolveConfig {
            snapshot_every: Some(0.5),
            ..SolveConfig::default()
        };
        let s = solve(&Polynomial::zero(), &InitialDatum::step(), grid, 1.0, &cfg).unwrap();
        let times: Vec<f64> = s.snapshots.iter().map(|f| f.t).collect();
        assert_eq!(times.len(), 3);
        assert_eq!(times[0], 0.0);
        assert_eq!(times[2], 1.0);
        assert!((times[1] - 0.5).abs() < 1e-12);
        assert_eq!(s.steps, 400);
        let zero = solve(
            &Polynomial::zero(),
            &InitialDatum::step(),
            grid,
            0.0,
            &SolveConfig::default(),
        )
        .unwrap();
        assert_eq!(zero.field.values[40], 0.5);
    }

    #[test]
    fn rejects_non_monotone_step() {
        let grid = Grid1D::with_spacing(-4.0, 4.0, 0.1).unwrap();
        let cfg = SolveConfig {
            dt: Some(0.02),
            ..SolveConfig::default()
        };
        assert!(matches!(
            solve(&Polynomial::zero(), &InitialDatum::step(), grid, 1.0, &cfg),
            Err(PdeError::NotMonotone { .. })
        ));
    }

    #[test]
    fn blow_up_is_reported() {
        let grid = Grid1D::with_spacing(-2.0, 2.0, 0.1).unwrap();
        let r = solve(
            &poly(&[0.0, 0.0, 0.0, 1.0]),
            &InitialDatum::Constant(1.0),
            grid,
            1.0,
            &SolveConfig::default(),
        );
        assert!(matches!(r, Err(PdeError::Unstable { .. })));
    }
}
