//! Polynomial to model compilers.

use std::collections::BTreeMap;

use super::{
    check_boundary, ModelError, OffspringDistribution, RandomOutcomeModel, RandomThresholdModel,
    RecursiveModel, PROB_TOL,
};
use crate::poly::{binom_f, BernsteinVector, Polynomial};

fn natural_arity(f: &Polynomial) -> usize {
    f.degree().max(2)
}

fn check_arity(f: &Polynomial, arity: usize) -> Result<(), ModelError> {
    if arity < 2 || arity < f.degree() {
        return Err(ModelError::Arity {
            arity,
            degree: f.degree(),
        });
    }
    Ok(())
}

/// Smallest admissible outcome-model rate, floored at 1.
pub fn default_outcome_rate(b: &BernsteinVector) -> f64 {
    (b.order() as f64 * b.max_abs()).max(1.0)
}

/// Smallest rate that makes the compiled table monotone, floored at 1.
pub fn default_threshold_rate(b: &BernsteinVector) -> f64 {
    (2.0 * b.order() as f64 * b.max_abs()).max(1.0)
}

/// `alpha_k = k/N + b_k / rate`, with the endpoints pinned to 0 and 1.
fn biased_table(b: &BernsteinVector, rate: f64) -> Result<Vec<f64>, ModelError> {
    let n = b.order();
    let mut alpha = vec![0.0; n + 1];
    alpha[n] = 1.0;
    for k in 1..n {
        // mu_k = b_k / rate is the bias relative to the unbiased vote k/N
        let mu = b.coeffs()[k] / rate;
        let a = k as f64 / n as f64 + mu;
        if !(-PROB_TOL..=1.0 + PROB_TOL).contains(&a) {
            return Err(ModelError::RateTooSmall { rate, k, alpha: a });
        }
        alpha[k] = a.clamp(0.0, 1.0);
    }
    Ok(alpha)
}

fn check_rate(rate: f64) -> Result<f64, ModelError> {
    if rate.is_finite() && rate > 0.0 {
        Ok(rate)
    } else {
        Err(ModelError::Rate(rate))
    }
}

/// Random-outcome model on pure `N`-ary branching, `N = max(deg f, 2)`.
pub fn compile_outcome(
    f: &Polynomial,
    rate: Option<f64>,
) -> Result<RandomOutcomeModel, ModelError> {
    compile_outcome_with_arity(f, natural_arity(f), rate)
}

pub fn compile_outcome_with_arity(
    f: &Polynomial,
    arity: usize,
    rate: Option<f64>,
) -> Result<RandomOutcomeModel, ModelError> {
    check_boundary(f)?;
    check_arity(f, arity)?;
    let b = f.to_bernstein(arity)?;
    let rate = check_rate(rate.unwrap_or_else(|| default_outcome_rate(&b)))?;
    let alpha = biased_table(&b, rate)?;
    Ok(RandomOutcomeModel {
        rate,
        offspring: OffspringDistribution::pure(arity)?,
        alpha: BTreeMap::from([(arity, alpha)]),
    })
}

/// Random-threshold model on pure `N`-ary branching.
pub fn compile_threshold(
    f: &Polynomial,
    rate: Option<f64>,
) -> Result<RandomThresholdModel, ModelError> {
    compile_threshold_with_arity(f, natural_arity(f), rate)
}

pub fn compile_threshold_with_arity(
    f: &Polynomial,
    arity: usize,
    rate: Option<f64>,
) -> Result<RandomThresholdModel, ModelError> {
    check_boundary(f)?;
    check_arity(f, arity)?;
    let b = f.to_bernstein(arity)?;
    let rate = check_rate(rate.unwrap_or_else(|| default_threshold_rate(&b)))?;
    let alpha = biased_table(&b, rate)?;
    let mut zeta = Vec::with_capacity(arity + 1);
    zeta.push(0.0);
    for k in 1..=arity {
        let z = alpha[k] - alpha[k - 1];
        if z < -PROB_TOL {
            return Err(ModelError::NotMonotone { rate, k, zeta: z });
        }
        zeta.push(z.max(0.0));
    }
    Ok(RandomThresholdModel { rate, arity, zeta })
}

/// Recursive propagation model with arity `deg f`.
pub fn compile_recursive(f: &Polynomial) -> Result<RecursiveModel, ModelError> {
    if f.is_zero() {
        return Err(ModelError::ZeroNeedsArity);
    }
    if f.degree() == 0 {
        // a constant has no natural arity either; binary is the smallest tree
        return compile_recursive_with_arity(f, 2);
    }
    compile_recursive_with_arity(f, f.degree())
}

pub fn compile_recursive_with_arity(
    f: &Polynomial,
    arity: usize,
) -> Result<RecursiveModel, ModelError> {
    if arity < 1 || arity < f.degree() || arity > crate::poly::MAX_DEGREE {
        return Err(ModelError::Arity {
            arity,
            degree: f.degree(),
        });
    }
    let symmetric_coeffs = (0..=arity)
        .map(|j| f.coeff(j) / binom_f(arity, j))
        .collect();
    Ok(RecursiveModel {
        arity,
        f: f.clone(),
        symmetric_coeffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::forward_nonlinearity;

    fn p(c: &[f64]) -> Polynomial {
        Polynomial::new(c.to_vec()).unwrap()
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn heat_case_is_unbiased() {
        let m = compile_outcome(&Polynomial::zero(), None).unwrap();
        assert_eq!(m.rate, 1.0);
        assert_eq!(m.offspring.pure_arity(), Some(2));
        assert_eq!(m.table(2).unwrap(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn allen_cahn_outcome() {
        // b = (0, -1/3, 1/3, 0), so the default rate is max(3 * 1/3, 1) = 1 and
        // the compiled table is the ternary majority rule.
        let f = p(&[0.0, -1.0, 3.0, -2.0]);
        let m = compile_outcome(&f, None).unwrap();
        assert_eq!(m.rate, 1.0);
        assert_close(m.table(3).unwrap(), &[0.0, 0.0, 1.0, 1.0], 1e-15);
        assert!(forward_nonlinearity(&m.clone().into()).approx_eq(&f, 1e-12));

        let m = compile_outcome(&f, Some(2.0)).unwrap();
        assert_close(
            m.table(3).unwrap(),
            &[0.0, 1.0 / 6.0, 5.0 / 6.0, 1.0],
            1e-15,
        );
        assert!(forward_nonlinearity(&m.into()).approx_eq(&f, 1e-12));
    }

    #[test]
    fn fkpp_outcome_with_override() {
        let f = p(&[0.0, 1.0, -1.0]);
        let m = compile_outcome(&f, Some(10.0)).unwrap();
        assert_close(m.table(2).unwrap(), &[0.0, 0.55, 1.0], 1e-15);
        assert!(forward_nonlinearity(&m.into()).approx_eq(&f, 1e-12));
        // default: rate 1 reproduces the McKean "at least one" rule
        let m = compile_outcome(&f, None).unwrap();
        assert_eq!(m.rate, 1.0);
        assert_close(m.table(2).unwrap(), &[0.0, 1.0, 1.0], 1e-15);
    }

    #[test]
    fn outcome_errors() {
        let not_bc = p(&[0.1, 1.0, -1.0]);
        assert!(matches!(
            compile_outcome(&not_bc, None),
            Err(ModelError::Boundary { .. })
        ));
        let f = p(&[0.0, 1.0, -1.0]);
        assert_eq!(
            compile_outcome(&f, Some(0.25)),
            Err(ModelError::RateTooSmall {
                rate: 0.25,
                k: 1,
                alpha: 2.5
            })
        );
        assert!(matches!(
            compile_outcome(&f, Some(-1.0)),
            Err(ModelError::Rate(_))
        ));
    }

    #[test]
    fn threshold_examples() {
        let f = p(&[0.0, 1.0, -1.0]);
        let t = compile_threshold(&f, None).unwrap();
        assert_eq!(t.rate, 2.0);
        assert_close(&t.zeta, &[0.0, 0.75, 0.25], 1e-15);
        assert_close(&t.cumulative_alpha(), &[0.0, 0.75, 1.0], 1e-15);

        let t = compile_threshold(&Polynomial::zero(), None).unwrap();
        assert_close(&t.zeta, &[0.0, 0.5, 0.5], 1e-15);

        let ac = p(&[0.0, -1.0, 3.0, -2.0]);
        let t = compile_threshold(&ac, None).unwrap();
        assert_eq!(t.rate, 2.0);
        assert_close(&t.zeta, &[0.0, 1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1e-15);

        // 3u(1-u)(1-2u) has b = (0, 1, -1, 0); at rate 3 the table is (0, 2/3, 1/3, 1)
        let f = p(&[0.0, 3.0, -9.0, 6.0]);
        assert!(compile_outcome(&f, Some(3.0)).is_ok());
        assert!(matches!(
            compile_threshold(&f, Some(3.0)),
            Err(ModelError::NotMonotone { k: 2, .. })
        ));
    }

    #[test]
    fn majority_table_converts_to_threshold() {
        let efp = RandomOutcomeModel::pure(1.0, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let t = efp.to_threshold().unwrap();
        assert_eq!(t.zeta, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn recursive_examples() {
        let m = compile_recursive(&p(&[0.0, 1.0, -1.0])).unwrap();
        assert_eq!(m.arity, 2);
        assert_eq!(m.symmetric_coeffs, vec![0.0, 0.5, -1.0]);
        let m = compile_recursive(&p(&[0.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(m.symmetric_coeffs, vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(
            compile_recursive(&Polynomial::zero()),
            Err(ModelError::ZeroNeedsArity)
        );
        let m = compile_recursive_with_arity(&Polynomial::zero(), 3).unwrap();
        assert_eq!(m.combine(&[0.2, 0.4, 0.9]), 0.5);
    }
}
