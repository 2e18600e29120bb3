//! Recognising McKean nonlinearities `f(u) = beta (1 - u - sum_k p_k (1-u)^k)`.

use std::fmt;

use super::{check_boundary, ModelError, OffspringDistribution};
use crate::poly::Polynomial;

const COEFF_TOL: f64 = 1e-9;

/// Branching rate and offspring law whose McKean functional yields `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct McKeanDecomposition {
    pub rate: f64,
    pub offspring: OffspringDistribution,
    /// `f'(0) = rate * (sum k p_k - 1)`.
    pub lambda: f64,
}

impl McKeanDecomposition {
    /// `beta (1 - u - sum_k p_k (1-u)^k)` in the power basis.
    pub fn nonlinearity(&self) -> Polynomial {
        let one_minus_u = Polynomial::new(vec![1.0, -1.0]).expect("finite");
        let mut acc = one_minus_u.clone();
        for &(k, p) in self.offspring.probs() {
            let mut power = Polynomial::new(vec![1.0]).expect("finite");
            for _ in 0..k {
                power = power.mul(&one_minus_u);
            }
            acc = acc.sub(&power.scale(p));
        }
        acc.scale(self.rate)
    }
}

/// Which condition of the McKean form `f = sum_j c_j (1-u)^j` fails.
#[derive(Debug, Clone, PartialEq)]
pub enum NotMcKean {
    /// `c_1` must be positive; it is the branching rate.
    NonPositiveLinear { c1: f64 },
    /// `c_j` must be non-positive for `j >= 2`; it is `-rate * p_j`.
    PositiveHigher { j: usize, cj: f64 },
    /// `-sum_{j>=2} c_j` must equal `c_1` so that the `p_j` sum to one.
    SumMismatch { c1: f64, minus_higher_sum: f64 },
}

impl fmt::Display for NotMcKean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NotMcKean::NonPositiveLinear { c1 } => {
                write!(f, "coefficient of (1-u) is {c1}, but must be positive")
            }
            NotMcKean::PositiveHigher { j, cj } => {
                write!(
                    f,
                    "coefficient of (1-u)^{j} is {cj}, but must be non-positive"
                )
            }
            NotMcKean::SumMismatch {
                c1,
                minus_higher_sum,
            } => write!(
                f,
                "higher coefficients sum to {minus_higher_sum} in magnitude, but must equal {c1}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum McKeanTest {
    McKean(McKeanDecomposition),
    NotMcKean(NotMcKean),
}

pub fn mckean_decompose(f: &Polynomial) -> Result<McKeanTest, ModelError> {
    check_boundary(f)?;
    let c = f.coeffs_in_one_minus_u();
    let c1 = c.get(1).copied().unwrap_or(0.0);
    if c1 <= COEFF_TOL {
        return Ok(McKeanTest::NotMcKean(NotMcKean::NonPositiveLinear { c1 }));
    }
    if let Some((j, &cj)) = c
        .iter()
        .enumerate()
        .skip(2)
        .find(|&(_, &cj)| cj > COEFF_TOL)
    {
        return Ok(McKeanTest::NotMcKean(NotMcKean::PositiveHigher { j, cj }));
    }
    let minus_higher_sum: f64 = -c.iter().skip(2).sum::<f64>();
    if (minus_higher_sum - c1).abs() > COEFF_TOL {
        return Ok(McKeanTest::NotMcKean(NotMcKean::SumMismatch {
            c1,
            minus_higher_sum,
        }));
    }
    let rate = c1;
    let probs: Vec<(usize, f64)> = c
        .iter()
        .enumerate()
        .skip(2)
        .filter(|&(_, &cj)| cj < 0.0)
        .map(|(j, &cj)| (j, -cj / minus_higher_sum))
        .collect();
    let offspring = OffspringDistribution::new(probs)?;
    let lambda = rate * (offspring.mean() - 1.0);
    Ok(McKeanTest::McKean(McKeanDecomposition {
        rate,
        offspring,
        lambda,
    }))
}
