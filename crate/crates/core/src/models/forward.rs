//! Model to nonlinearity.

use super::{CompositeLabelModel, Model, RandomOutcomeModel, RandomThresholdModel};
use crate::poly::{BernsteinVector, Polynomial};

/// The reaction term `f` of the equation `u_t = Δu + f(u)` that the model represents.
pub fn forward_nonlinearity(model: &Model) -> Polynomial {
    let (f, scale) = match model {
        Model::Outcome(m) => (outcome(m), m.rate),
        Model::Threshold(m) => (threshold(m), m.rate),
        Model::Recursive(m) => return m.f.clone(),
        Model::Composite(m) => (composite(m), m.rate),
    };
    // cancellation leaves rounding dust where exact zeros belong
    f.chop(1e-13 * scale.max(1.0))
}

/// `sum_k C(n,k) a_k u^k (1-u)^(n-k) - u` for one table.
fn table_drift(alpha: &[f64]) -> Polynomial {
    let bv = BernsteinVector::new(alpha.to_vec()).expect("validated table");
    Polynomial::from_bernstein(&bv).sub(&Polynomial::monomial(1.0, 1))
}

fn outcome(m: &RandomOutcomeModel) -> Polynomial {
    m.offspring
        .probs()
        .iter()
        .map(|&(n, p)| table_drift(&m.alpha[&n]).scale(p))
        .fold(Polynomial::zero(), |acc, term| acc.add(&term))
        .scale(m.rate)
}

/// `rate * (sum_j zeta_j sum_{k >= j} B_{k,N}(u) - u)`, built from the tail sums directly.
fn threshold(m: &RandomThresholdModel) -> Polynomial {
    let n = m.arity;
    let mut acc = Polynomial::zero();
    for (j, &z) in m.zeta.iter().enumerate() {
        if z == 0.0 {
            continue;
        }
        // P(at least j of n successes) has Bernstein coordinates 1 for k >= j
        let tail: Vec<f64> = (0..=n).map(|k| if k >= j { 1.0 } else { 0.0 }).collect();
        let tail = Polynomial::from_bernstein(&BernsteinVector::new(tail).expect("order >= 1"));
        acc = acc.add(&tail.scale(z));
    }
    acc.sub(&Polynomial::monomial(1.0, 1)).scale(m.rate)
}

fn composite(m: &CompositeLabelModel) -> Polynomial {
    m.labels
        .iter()
        .map(|l| table_drift(&l.alpha).scale(l.probability))
        .fold(Polynomial::zero(), |acc, term| acc.add(&term))
        .scale(m.rate)
}
