//! Real polynomials in the power basis and their Bernstein coordinates.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::numfmt::g17;

/// Largest degree supported by the exact binomial table.
pub const MAX_DEGREE: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("binomial({n}, {k}) is out of range (need 0 <= k <= n <= {MAX_DEGREE})")]
    BinomialRange { n: usize, k: usize },
    #[error("Bernstein order {order} is smaller than polynomial degree {degree}")]
    DegreeMismatch { order: usize, degree: usize },
    #[error("Bernstein order must be at least 1")]
    ZeroOrder,
    #[error("degree {0} exceeds the supported maximum of {MAX_DEGREE}")]
    DegreeTooLarge(usize),
    #[error("coefficient {index} is not finite")]
    NonFinite { index: usize },
    #[error("cannot parse polynomial: {0}")]
    Parse(String),
}

/// Exact binomial coefficient C(n, k) for `0 <= k <= n <= 64`.
pub fn binomial(n: usize, k: usize) -> Result<u64, PolyError> {
    if k > n || n > MAX_DEGREE {
        return Err(PolyError::BinomialRange { n, k });
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    Ok(acc as u64)
}

/// Binomial coefficient as a float; callers guarantee the range.
pub(crate) fn binom_f(n: usize, k: usize) -> f64 {
    binomial(n, k).expect("binomial arguments in range") as f64
}

/// A polynomial `f_0 + f_1 u + ... + f_N u^N` with canonical (trimmed) coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a polynomial from power-basis coefficients, dropping exact trailing zeros.
    pub fn new(coeffs: Vec<f64>) -> Result<Self, PolyError> {
        if let Some(index) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(PolyError::NonFinite { index });
        }
        let p = Self::from_raw(coeffs);
        if p.degree() > MAX_DEGREE {
            return Err(PolyError::DegreeTooLarge(p.degree()));
        }
        Ok(p)
    }

    fn from_raw(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        // normalise -0.0 so equal polynomials compare equal
        for c in &mut coeffs {
            if *c == 0.0 {
                *c = 0.0;
            }
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    /// The monomial `c u^k`.
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Self::from_raw(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `u^k`, zero beyond the degree.
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    /// Horner evaluation.
    pub fn eval(&self, u: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.degree() == 0 {
            return Self::zero();
        }
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| k as f64 * c)
            .collect();
        Self::from_raw(coeffs)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        Self::from_raw((0..n).map(|k| self.coeff(k) + other.coeff(k)).collect())
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Self::from_raw(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::from_raw(out)
    }

    /// Re-expands `f(u)` in powers of `v = 1 - u`, returning `c` with `f = sum_j c_j v^j`.
    pub fn coeffs_in_one_minus_u(&self) -> Vec<f64> {
        let n = self.degree();
        // f(1 - v) = sum_k f_k sum_j C(k, j) (-v)^j
        let mut c = vec![0.0; n + 1];
        for (k, &fk) in self.coeffs.iter().enumerate() {
            for (j, cj) in c.iter_mut().enumerate().take(k + 1) {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                *cj += fk * binom_f(k, j) * sign;
            }
        }
        c
    }

    /// Sets coefficients with magnitude at most `tol` to zero and re-trims.
    pub fn chop(&self, tol: f64) -> Polynomial {
        Self::from_raw(
            self.coeffs
                .iter()
                .map(|&c| if c.abs() <= tol { 0.0 } else { c })
                .collect(),
        )
    }

    /// Largest coefficient-wise difference, treating missing coefficients as zero.
    pub fn max_coeff_diff(&self, other: &Polynomial) -> f64 {
        let n = self.coeffs.len().max(other.coeffs.len());
        (0..n)
            .map(|k| (self.coeff(k) - other.coeff(k)).abs())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Polynomial, tol: f64) -> bool {
        self.max_coeff_diff(other) <= tol
    }

    /// Power-basis text form `c0 + c1*u + c2*u^2 + ...` with every coefficient at `%.17g`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, &c) in self.coeffs.iter().enumerate() {
            if k > 0 {
                out.push_str(if c.is_sign_negative() { " - " } else { " + " });
            } else if c.is_sign_negative() {
                out.push('-');
            }
            out.push_str(&g17(c.abs()));
            match k {
                0 => {}
                1 => out.push_str("*u"),
                _ => out.push_str(&format!("*u^{k}")),
            }
        }
        out
    }

    /// Bare coefficient list `[c0, c1, ...]`.
    pub fn to_list(&self) -> String {
        let parts: Vec<String> = self.coeffs.iter().map(|&c| g17(c)).collect();
        format!("[{}]", parts.join(", "))
    }

    /// Bernstein coordinates of `self` at the given order.
    pub fn to_bernstein(&self, order: usize) -> Result<BernsteinVector, PolyError> {
        if order == 0 {
            return Err(PolyError::ZeroOrder);
        }
        if order < self.degree() {
            return Err(PolyError::DegreeMismatch {
                order,
                degree: self.degree(),
            });
        }
        if order > MAX_DEGREE {
            return Err(PolyError::DegreeTooLarge(order));
        }
        // b_k = sum_{j <= k} C(k, j) / C(order, j) f_j
        let mut b: Vec<f64> = (0..=order)
            .map(|k| {
                (0..=k.min(self.degree()))
                    .map(|j| binom_f(k, j) / binom_f(order, j) * self.coeffs[j])
                    .sum()
            })
            .collect();
        b[0] = self.coeffs[0];
        b[order] = self.eval(1.0);
        Ok(BernsteinVector { order, b })
    }

    /// Inverse of [`Polynomial::to_bernstein`].
    pub fn from_bernstein(bv: &BernsteinVector) -> Polynomial {
        let n = bv.order;
        // coefficient of u^m: sum_{k <= m} b_k C(n, k) C(n - k, m - k) (-1)^(m - k)
        let coeffs = (0..=n)
            .map(|m| {
                (0..=m)
                    .map(|k| {
                        let sign = if (m - k) % 2 == 0 { 1.0 } else { -1.0 };
                        bv.b[k] * binom_f(n, k) * binom_f(n - k, m - k) * sign
                    })
                    .sum()
            })
            .collect();
        Self::from_raw(coeffs)
    }
}

impl Default for Polynomial {
    fn default() -> Self {
        Self::zero()
    }
}

/// Short human form, e.g. `-u + 3u^2 - 2u^3`.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let mag = c.abs();
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            }
            first = false;
            let coef = if k > 0 && mag == 1.0 {
                String::new()
            } else {
                format!("{mag}")
            };
            match k {
                0 => write!(f, "{coef}")?,
                1 => write!(f, "{coef}u")?,
                _ => write!(f, "{coef}u^{k}")?,
            }
        }
        Ok(())
    }
}

impl FromStr for Polynomial {
    type Err = PolyError;

    /// Accepts `[c0, c1, ...]` or a sum of terms such as `1 - 3*u^2 + 2u^3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| PolyError::Parse(format!("unterminated list `{s}`")))?;
            if inner.trim().is_empty() {
                return Polynomial::new(vec![0.0]);
            }
            let coeffs = inner
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| PolyError::Parse(format!("bad coefficient `{}`", t.trim())))
                })
                .collect::<Result<Vec<_>, _>>()?;
            return Polynomial::new(coeffs);
        }
        parse_terms(s)
    }
}

fn parse_terms(s: &str) -> Result<Polynomial, PolyError> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err(PolyError::Parse("empty input".into()));
    }
    // split into signed terms, keeping exponent signs such as `1e-3`
    let mut terms = Vec::new();
    let mut start = 0;
    let bytes = compact.as_bytes();
    for i in 1..bytes.len() {
        let c = bytes[i];
        let prev = bytes[i - 1];
        if (c == b'+' || c == b'-') && !matches!(prev, b'e' | b'E' | b'^' | b'*' | b'+' | b'-') {
            terms.push(&compact[start..i]);
            start = i;
        }
    }
    terms.push(&compact[start..]);

    let mut coeffs = vec![0.0; 1];
    for term in terms {
        let (c, k) = parse_term(term)?;
        if k > MAX_DEGREE {
            return Err(PolyError::DegreeTooLarge(k));
        }
        if coeffs.len() <= k {
            coeffs.resize(k + 1, 0.0);
        }
        coeffs[k] += c;
    }
    Polynomial::new(coeffs)
}

fn parse_term(term: &str) -> Result<(f64, usize), PolyError> {
    let bad = || PolyError::Parse(format!("bad term `{term}`"));
    let (sign, body) = match term.as_bytes().first() {
        Some(b'-') => (-1.0, &term[1..]),
        Some(b'+') => (1.0, &term[1..]),
        _ => (1.0, term),
    };
    let Some(pos) = body.find('u') else {
        return Ok((sign * body.parse::<f64>().map_err(|_| bad())?, 0));
    };
    let (left, right) = (&body[..pos], &body[pos + 1..]);
    let left = left.strip_suffix('*').unwrap_or(left);
    let coef = if left.is_empty() {
        1.0
    } else {
        left.parse::<f64>().map_err(|_| bad())?
    };
    let power = if right.is_empty() {
        1
    } else {
        right
            .strip_prefix('^')
            .ok_or_else(bad)?
            .parse::<usize>()
            .map_err(|_| bad())?
    };
    Ok((sign * coef, power))
}

/// Coordinates `b_0..b_N` of a polynomial in the Bernstein basis of order `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinVector {
    order: usize,
    b: Vec<f64>,
}

impl BernsteinVector {
    pub fn new(b: Vec<f64>) -> Result<Self, PolyError> {
        if b.len() < 2 {
            return Err(PolyError::ZeroOrder);
        }
        if b.len() - 1 > MAX_DEGREE {
            return Err(PolyError::DegreeTooLarge(b.len() - 1));
        }
        if let Some(index) = b.iter().position(|c| !c.is_finite()) {
            return Err(PolyError::NonFinite { index });
        }
        Ok(Self {
            order: b.len() - 1,
            b,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.b
    }

    pub fn max_abs(&self) -> f64 {
        self.b.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// De Casteljau evaluation.
    pub fn eval(&self, u: f64) -> f64 {
        let mut work = self.b.clone();
        for level in 1..=self.order {
            for i in 0..=self.order - level {
                work[i] = (1.0 - u) * work[i] + u * work[i + 1];
            }
        }
        work[0]
    }
}

/// The basis polynomial `B_{k,n}(u) = C(n,k) u^k (1-u)^(n-k)`.
pub fn bernstein_basis(k: usize, n: usize, u: f64) -> f64 {
    binom_f(n, k) * u.powi(k as i32) * (1.0 - u).powi((n - k) as i32)
}
