//! Initial data `g(x)`.

use std::fmt;
use std::str::FromStr;

use libm::erfc;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    /// `1(x_1 < shift)`.
    Step {
        shift: f64,
    },
    /// `1(a < x_1 < b)`.
    Interval {
        a: f64,
        b: f64,
    },
    /// `height * exp(-|x - center|^2 / (2 width^2))`, clipped to `[0, 1]`.
    Gaussian {
        center: f64,
        width: f64,
        height: f64,
    },
    Constant(f64),
    /// Piecewise-linear in `x_1` through the nodes, constant beyond them.
    Tabulated {
        xs: Vec<f64>,
        values: Vec<f64>,
    },
    /// `1 - g`.
    Complement(Box<InitialDatum>),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid initial datum `{spec}`: {reason}")]
pub struct DatumError {
    pub spec: String,
    pub reason: String,
}

impl InitialDatum {
    pub fn step() -> Self {
        InitialDatum::Step { shift: 0.0 }
    }

    pub fn complement(self) -> Self {
        match self {
            InitialDatum::Complement(inner) => *inner,
            other => InitialDatum::Complement(Box::new(other)),
        }
    }

    pub fn tabulated(xs: Vec<f64>, values: Vec<f64>) -> Result<Self, DatumError> {
        let err = |reason: &str| DatumError {
            spec: "table".into(),
            reason: reason.into(),
        };
        if xs.is_empty() || xs.len() != values.len() {
            return Err(err("needs equally many nodes and values, at least one"));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(err("nodes must be strictly increasing"));
        }
        if xs.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(err("nodes and values must be finite"));
        }
        Ok(InitialDatum::Tabulated { xs, values })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            InitialDatum::Step { shift } => f64::from(u8::from(x[0] < *shift)),
            InitialDatum::Interval { a, b } => f64::from(u8::from(*a < x[0] && x[0] < *b)),
            InitialDatum::Gaussian {
                center,
                width,
                height,
            } => {
                let r2: f64 = x.iter().map(|xi| (xi - center).powi(2)).sum();
                (height * (-r2 / (2.0 * width * width)).exp()).clamp(0.0, 1.0)
            }
            InitialDatum::Constant(c) => *c,
            InitialDatum::Tabulated { xs, values } => interpolate(xs, values, x[0]),
            InitialDatum::Complement(inner) => 1.0 - inner.eval(x),
        }
    }

    /// `E[g(y + √(2s) Z)]` for a standard normal `Z`, in closed form where one exists.
    ///
    /// `None` for a Gaussian bump whose height exceeds 1, where clipping leaves no closed form.
    pub fn heat_average(&self, y: &[f64], s: f64) -> Option<f64> {
        if s == 0.0 {
            return Some(self.eval(y));
        }
        let sigma = (2.0 * s).sqrt();
        match self {
            InitialDatum::Step { shift } => Some(normal_cdf((shift - y[0]) / sigma)),
            InitialDatum::Interval { a, b } => {
                Some(normal_cdf((b - y[0]) / sigma) - normal_cdf((a - y[0]) / sigma))
            }
            InitialDatum::Gaussian {
                center,
                width,
                height,
            } if *height <= 1.0 => {
                let w2 = width * width;
                let spread = w2 + 2.0 * s;
                let r2: f64 = y.iter().map(|yi| (yi - center).powi(2)).sum();
                Some(
                    height.max(0.0)
                        * (w2 / spread).powf(y.len() as f64 / 2.0)
                        * (-r2 / (2.0 * spread)).exp(),
                )
            }
            InitialDatum::Gaussian { .. } => None,
            InitialDatum::Constant(c) => Some(*c),
            InitialDatum::Tabulated { xs, values } => {
                Some(tabulated_average(xs, values, y[0], sigma))
            }
            InitialDatum::Complement(inner) => inner.heat_average(y, s).map(|v| 1.0 - v),
        }
    }

    /// Value used to sample the datum onto a grid: jump points take the mean of the one-sided limits.
    pub fn grid_value(&self, x: f64) -> f64 {
        match self {
            InitialDatum::Step { shift } if x == *shift => 0.5,
            InitialDatum::Interval { a, b } if x == *a || x == *b => 0.5,
            InitialDatum::Complement(inner) => 1.0 - inner.grid_value(x),
            other => other.eval(&[x]),
        }
    }

    /// Bounds `(inf g, sup g)`.
    pub fn range(&self) -> (f64, f64) {
        match self {
            InitialDatum::Step { .. } | InitialDatum::Interval { .. } => (0.0, 1.0),
            InitialDatum::Gaussian { height, .. } => (0.0, height.clamp(0.0, 1.0)),
            InitialDatum::Constant(c) => (*c, *c),
            InitialDatum::Tabulated { values, .. } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                }),
            InitialDatum::Complement(inner) => {
                let (lo, hi) = inner.range();
                (1.0 - hi, 1.0 - lo)
            }
        }
    }

    pub fn is_probability(&self) -> bool {
        let (lo, hi) = self.range();
        lo >= 0.0 && hi <= 1.0
    }

    /// Limits as `x_1 -> -inf` and `x_1 -> +inf`.
    pub fn limits(&self) -> (f64, f64) {
        match self {
            InitialDatum::Step { .. } => (1.0, 0.0),
            InitialDatum::Interval { .. } | InitialDatum::Gaussian { .. } => (0.0, 0.0),
            InitialDatum::Constant(c) => (*c, *c),
            InitialDatum::Tabulated { values, .. } => (values[0], values[values.len() - 1]),
            InitialDatum::Complement(inner) => {
                let (l, r) = inner.limits();
                (1.0 - l, 1.0 - r)
            }
        }
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Gaussian average of the piecewise-linear interpolant, piece by piece:
/// `∫_l^r (a + b x) N(y, σ²)(dx) = (a + b y)(Φ(β) - Φ(α)) + b σ (φ(α) - φ(β))`.
fn tabulated_average(xs: &[f64], values: &[f64], y: f64, sigma: f64) -> f64 {
    let z = |x: f64| (x - y) / sigma;
    let piece = |l: f64, r: f64, a: f64, b: f64| {
        let (al, be) = (z(l), z(r));
        let (pl, pr) = if l.is_finite() {
            (normal_pdf(al), 0.0)
        } else {
            (0.0, 0.0)
        };
        let pr = if r.is_finite() { normal_pdf(be) } else { pr };
        (a + b * y) * (normal_cdf(be) - normal_cdf(al)) + b * sigma * (pl - pr)
    };
    let last = xs.len() - 1;
    let mut total = piece(f64::NEG_INFINITY, xs[0], values[0], 0.0)
        + piece(xs[last], f64::INFINITY, values[last], 0.0);
    for i in 0..last {
        let b = (values[i + 1] - values[i]) / (xs[i + 1] - xs[i]);
        total += piece(xs[i], xs[i + 1], values[i] - b * xs[i], b);
    }
    total
}

fn interpolate(xs: &[f64], values: &[f64], x: f64) -> f64 {
    let last = xs.len() - 1;
    if x <= xs[0] {
        return values[0];
    }
    if x >= xs[last] {
        return values[last];
    }
    let i = xs.partition_point(|&node| node <= x) - 1;
    let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
    values[i] + w * (values[i + 1] - values[i])
}

impl fmt::Display for InitialDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialDatum::Step { shift } if *shift == 0.0 => write!(f, "step"),
            InitialDatum::Step { shift } => write!(f, "step:{}", shift),
            InitialDatum::Interval { a, b } => write!(f, "interval:{}:{}", a, b),
            InitialDatum::Gaussian {
                center,
                width,
                height,
            } => {
                write!(f, "gauss:{}:{}:{}", center, width, height)
            }
            InitialDatum::Constant(c) => write!(f, "const:{}", c),
            InitialDatum::Tabulated { xs, values } => {
                let nodes: Vec<String> = xs
                    .iter()
                    .zip(values)
                    .map(|(x, v)| format!("{}={}", x, v))
                    .collect();
                write!(f, "table:{}", nodes.join(","))
            }
            InitialDatum::Complement(inner) => write!(f, "not:{inner}"),
        }
    }
}

/// Text forms: `step`, `step:s`, `interval:a:b`, `gauss:c:w[:h]`, `const:c`,
/// `table:x0=u0,x1=u1,...` and `not:<datum>`.
impl FromStr for InitialDatum {
    type Err = DatumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let spec = s.trim();
        let err = |reason: String| DatumError {
            spec: spec.to_string(),
            reason,
        };
        if let Some(inner) = spec.strip_prefix("not:") {
            return Ok(InitialDatum::Complement(Box::new(inner.parse()?)));
        }
        let (head, rest) = spec.split_once(':').unwrap_or((spec, ""));
        if head == "table" {
            let mut xs = Vec::new();
            let mut values = Vec::new();
            for node in rest.split(',') {
                let (x, v) = node
                    .split_once('=')
                    .ok_or_else(|| err(format!("table node `{node}` is not `x=u`")))?;
                xs.push(parse_num(x).map_err(&err)?);
                values.push(parse_num(v).map_err(&err)?);
            }
            return InitialDatum::tabulated(xs, values).map_err(|e| err(e.reason));
        }
        let args: Vec<f64> = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(':')
                .map(parse_num)
                .collect::<Result<_, _>>()
                .map_err(&err)?
        };
        let arity = |lo: usize, hi: usize| {
            if (lo..=hi).contains(&args.len()) {
                Ok(())
            } else {
                Err(err(format!(
                    "`{head}` takes {lo} to {hi} parameters, got {}",
                    args.len()
                )))
            }
        };
        match head {
            "step" => {
                arity(0, 1)?;
                Ok(InitialDatum::Step {
                    shift: args.first().copied().unwrap_or(0.0),
                })
            }
            "interval" => {
                arity(2, 2)?;
                if !(args[0] < args[1]) {
                    return Err(err("interval needs a < b".into()));
                }
                Ok(InitialDatum::Interval {
                    a: args[0],
                    b: args[1],
                })
            }
            "gauss" => {
                arity(2, 3)?;
                if !(args[1] > 0.0) {
                    return Err(err("width must be positive".into()));
                }
                Ok(InitialDatum::Gaussian {
                    center: args[0],
                    width: args[1],
                    height: args.get(2).copied().unwrap_or(1.0),
                })
            }
            "const" => {
                arity(1, 1)?;
                Ok(InitialDatum::Constant(args[0]))
            }
            other => Err(err(format!(
                "unknown kind `{other}` (expected step, interval, gauss, const, table or not:)"
            ))),
        }
    }
}

fn parse_num(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}
