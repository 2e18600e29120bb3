//! Voting models on genealogical trees and their reaction nonlinearities.
//!
//! A model describes how a parent vertex turns the values of its children into
//! its own value. Every model has a forward map to the polynomial nonlinearity
//! `f` of the parabolic equation it represents, and the compilers go the other
//! way, from a polynomial `f` to a model.

mod catalog;
mod compile;
mod document;
mod forward;
mod mckean;
mod validate;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::poly::{binom_f, PolyError, Polynomial};

pub use catalog::{catalog, CatalogName, CatalogParams};
pub use compile::{
    compile_outcome, compile_outcome_with_arity, compile_recursive, compile_recursive_with_arity,
    compile_threshold, compile_threshold_with_arity, default_outcome_rate, default_threshold_rate,
};
pub use document::{DocumentError, ModelDocument};
pub use forward::forward_nonlinearity;
pub use mckean::{mckean_decompose, McKeanDecomposition, McKeanTest, NotMcKean};
pub use validate::{validate, Diagnostics, Issue};

/// Tolerance for probability constraints; values this close to `[0, 1]` are clamped.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("boundary condition violated: f(0) = {f0:e}, f(1) = {f1:e} (both must vanish)")]
    Boundary { f0: f64, f1: f64 },
    #[error("rate {rate} is too small: alpha[{k}] = {alpha} lies outside [0, 1]")]
    RateTooSmall { rate: f64, k: usize, alpha: f64 },
    #[error("rate {rate} is too small for a threshold model: zeta[{k}] = {zeta} is negative")]
    NotMonotone { rate: f64, k: usize, zeta: f64 },
    #[error("rate must be positive, got {0}")]
    Rate(f64),
    #[error("arity {arity} is smaller than the degree {degree} of f")]
    Arity { arity: usize, degree: usize },
    #[error("the zero polynomial has no natural arity; supply one explicitly")]
    ZeroNeedsArity,
    #[error("invalid offspring law: {0}")]
    Offspring(String),
    #[error("unknown catalog model `{0}`")]
    UnknownCatalog(String),
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("model is invalid: {0}")]
    Invalid(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Law of the number of children at a branching event, supported on `k >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringDistribution {
    /// `(k, p_k)` pairs with `p_k > 0`, sorted by `k`.
    probs: Vec<(usize, f64)>,
}

impl OffspringDistribution {
    pub fn new(probs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self, ModelError> {
        let mut map = BTreeMap::new();
        for (k, p) in probs {
            if k < 2 {
                return Err(ModelError::Offspring(format!(
                    "p_{k} given, but k must be >= 2"
                )));
            }
            if k > crate::poly::MAX_DEGREE {
                return Err(ModelError::Offspring(format!(
                    "k = {k} exceeds {}",
                    crate::poly::MAX_DEGREE
                )));
            }
            if !(p.is_finite() && (-PROB_TOL..=1.0 + PROB_TOL).contains(&p)) {
                return Err(ModelError::Offspring(format!(
                    "p_{k} = {p} is not a probability"
                )));
            }
            *map.entry(k).or_insert(0.0) += p.clamp(0.0, 1.0);
        }
        let probs: Vec<(usize, f64)> = map.into_iter().filter(|&(_, p)| p > 0.0).collect();
        let total: f64 = probs.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(ModelError::Offspring(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Every branching event produces exactly `n` children.
    pub fn pure(n: usize) -> Result<Self, ModelError> {
        Self::new([(n, 1.0)])
    }

    pub fn probs(&self) -> &[(usize, f64)] {
        &self.probs
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.probs
            .iter()
            .find(|&&(n, _)| n == k)
            .map_or(0.0, |&(_, p)| p)
    }

    pub fn max_children(&self) -> usize {
        self.probs.last().map_or(0, |&(k, _)| k)
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs.iter().map(|&(k, _)| k)
    }

    /// The single arity when the law is degenerate.
    pub fn pure_arity(&self) -> Option<usize> {
        match self.probs.as_slice() {
            [(k, _)] => Some(*k),
            _ => None,
        }
    }

    /// Mean number of children `sum k p_k`.
    pub fn mean(&self) -> f64 {
        self.probs.iter().map(|&(k, p)| k as f64 * p).sum()
    }

    /// Inverse-CDF draw from a uniform variate in `[0, 1)`.
    pub fn sample(&self, uniform: f64) -> usize {
        let mut acc = 0.0;
        for &(k, p) in &self.probs {
            acc += p;
            if uniform < acc {
                return k;
            }
        }
        self.max_children()
    }
}

/// Parent votes 1 with probability `alpha[n][k]` when `k` of its `n` children voted 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomOutcomeModel {
    pub rate: f64,
    pub offspring: OffspringDistribution,
    /// One table of length `n + 1` for every `n` in the offspring support.
    pub alpha: BTreeMap<usize, Vec<f64>>,
}

impl RandomOutcomeModel {
    /// Checked constructor; clamps entries within [`PROB_TOL`] of `[0, 1]`.
    pub fn new(
        rate: f64,
        offspring: OffspringDistribution,
        alpha: BTreeMap<usize, Vec<f64>>,
    ) -> Result<Self, ModelError> {
        let mut model = Self {
            rate,
            offspring,
            alpha,
        };
        let diag = validate::validate_outcome(&model);
        if !diag.is_valid() {
            return Err(ModelError::Invalid(diag.summary()));
        }
        for table in model.alpha.values_mut() {
            clamp_probabilities(table);
        }
        Ok(model)
    }

    /// Pure `arity`-ary model with a single table.
    pub fn pure(rate: f64, alpha: Vec<f64>) -> Result<Self, ModelError> {
        let arity = alpha.len().saturating_sub(1);
        let offspring = OffspringDistribution::pure(arity)?;
        Self::new(rate, offspring, BTreeMap::from([(arity, alpha)]))
    }

    pub fn table(&self, n: usize) -> Option<&[f64]> {
        self.alpha.get(&n).map(Vec::as_slice)
    }

    /// Differences of a monotone pure-arity table give the threshold law.
    pub fn to_threshold(&self) -> Result<RandomThresholdModel, ModelError> {
        let arity = self.offspring.pure_arity().ok_or_else(|| {
            ModelError::Invalid("threshold models need pure-arity branching".into())
        })?;
        let alpha = &self.alpha[&arity];
        let mut zeta = Vec::with_capacity(arity + 1);
        zeta.push(alpha[0]);
        for k in 1..=arity {
            let z = alpha[k] - alpha[k - 1];
            if z < -PROB_TOL {
                return Err(ModelError::NotMonotone {
                    rate: self.rate,
                    k,
                    zeta: z,
                });
            }
            zeta.push(z.max(0.0));
        }
        Ok(RandomThresholdModel {
            rate: self.rate,
            arity,
            zeta,
        })
    }
}

/// Parent votes 1 iff at least `L` children voted 1, with `P(L = j) = zeta[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomThresholdModel {
    pub rate: f64,
    pub arity: usize,
    pub zeta: Vec<f64>,
}

impl RandomThresholdModel {
    pub fn new(rate: f64, zeta: Vec<f64>) -> Result<Self, ModelError> {
        let arity = zeta.len().saturating_sub(1);
        let mut model = Self { rate, arity, zeta };
        let diag = validate::validate_threshold(&model);
        if !diag.is_valid() {
            return Err(ModelError::Invalid(diag.summary()));
        }
        clamp_probabilities(&mut model.zeta);
        Ok(model)
    }

    /// Cumulative sums `alpha_k = sum_{j <= k} zeta_j`.
    pub fn cumulative_alpha(&self) -> Vec<f64> {
        self.zeta
            .iter()
            .scan(0.0, |acc, &z| {
                *acc += z;
                Some(*acc)
            })
            .collect()
    }

    pub fn to_outcome(&self) -> Result<RandomOutcomeModel, ModelError> {
        let mut alpha = self.cumulative_alpha();
        alpha[self.arity] = 1.0;
        RandomOutcomeModel::pure(self.rate, alpha)
    }
}

/// Deterministic propagation `u_parent = S_N(u_1..u_N) + mean(u)` at unit rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursiveModel {
    pub arity: usize,
    pub f: Polynomial,
    /// `s_j = f_j / C(N, j)`, the weight of the `j`-th elementary symmetric polynomial.
    pub symmetric_coeffs: Vec<f64>,
}

impl RecursiveModel {
    pub const RATE: f64 = 1.0;

    /// Evaluates the symmetric polynomial `S_N` at the children's values.
    pub fn symmetric(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.arity);
        // elementary symmetric polynomials e_0..e_N of the values
        let mut e = vec![0.0; self.arity + 1];
        e[0] = 1.0;
        for (i, &v) in values.iter().enumerate() {
            for j in (1..=i + 1).rev() {
                e[j] += e[j - 1] * v;
            }
        }
        self.symmetric_coeffs
            .iter()
            .zip(&e)
            .map(|(s, e)| s * e)
            .sum()
    }

    /// Parent value from its children.
    pub fn combine(&self, values: &[f64]) -> f64 {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        self.symmetric(values) + mean
    }

    /// `sum_j s_j C(N, j) u^j`, which must equal `f`.
    pub fn reconstruct(&self) -> Polynomial {
        let coeffs = self
            .symmetric_coeffs
            .iter()
            .enumerate()
            .map(|(j, s)| s * binom_f(self.arity, j))
            .collect();
        Polynomial::new(coeffs).expect("finite coefficients")
    }
}

/// One label of a composite model.
#[derive(Debug, Clone, PartialEq)]
pub struct Label {
    pub name: String,
    pub probability: f64,
    pub alpha: Vec<f64>,
}

/// Each parent draws a label, then votes with that label's random-outcome table.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeLabelModel {
    pub rate: f64,
    pub arity: usize,
    pub labels: Vec<Label>,
}

impl CompositeLabelModel {
    pub fn new(rate: f64, arity: usize, mut labels: Vec<Label>) -> Result<Self, ModelError> {
        let model = Self {
            rate,
            arity,
            labels: labels.clone(),
        };
        let diag = validate::validate_composite(&model);
        if !diag.is_valid() {
            return Err(ModelError::Invalid(diag.summary()));
        }
        for label in &mut labels {
            clamp_probabilities(&mut label.alpha);
            label.probability = label.probability.clamp(0.0, 1.0);
        }
        Ok(Self {
            rate,
            arity,
            labels,
        })
    }

    pub fn label(&self, name: &str) -> Option<&Label> {
        self.labels.iter().find(|l| l.name == name)
    }

    /// Label-averaged table, the analytic mixture used by conditional estimation.
    pub fn mixed_alpha(&self) -> Vec<f64> {
        (0..=self.arity)
            .map(|k| self.labels.iter().map(|l| l.probability * l.alpha[k]).sum())
            .collect()
    }

    pub fn offspring(&self) -> OffspringDistribution {
        OffspringDistribution::pure(self.arity).expect("validated arity")
    }
}

/// Any of the supported model kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Outcome(RandomOutcomeModel),
    Threshold(RandomThresholdModel),
    Recursive(RecursiveModel),
    Composite(CompositeLabelModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Outcome(_) => "outcome",
            Model::Threshold(_) => "threshold",
            Model::Recursive(_) => "recursive",
            Model::Composite(_) => "composite",
        }
    }

    pub fn rate(&self) -> f64 {
        match self {
            Model::Outcome(m) => m.rate,
            Model::Threshold(m) => m.rate,
            Model::Recursive(_) => RecursiveModel::RATE,
            Model::Composite(m) => m.rate,
        }
    }

    pub fn offspring(&self) -> OffspringDistribution {
        match self {
            Model::Outcome(m) => m.offspring.clone(),
            Model::Threshold(m) => OffspringDistribution::pure(m.arity).expect("validated arity"),
            Model::Recursive(m) => OffspringDistribution::pure(m.arity).expect("validated arity"),
            Model::Composite(m) => m.offspring(),
        }
    }
}

impl From<RandomOutcomeModel> for Model {
    fn from(m: RandomOutcomeModel) -> Self {
        Model::Outcome(m)
    }
}

impl From<RandomThresholdModel> for Model {
    fn from(m: RandomThresholdModel) -> Self {
        Model::Threshold(m)
    }
}

impl From<RecursiveModel> for Model {
    fn from(m: RecursiveModel) -> Self {
        Model::Recursive(m)
    }
}

impl From<CompositeLabelModel> for Model {
    fn from(m: CompositeLabelModel) -> Self {
        Model::Composite(m)
    }
}

fn clamp_probabilities(values: &mut [f64]) {
    for v in values {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Checks `f(0) = f(1) = 0` within [`PROB_TOL`].
pub(crate) fn check_boundary(f: &Polynomial) -> Result<(), ModelError> {
    let (f0, f1) = (f.eval(0.0), f.eval(1.0));
    if f0.abs() > PROB_TOL || f1.abs() > PROB_TOL {
        return Err(ModelError::Boundary { f0, f1 });
    }
    Ok(())
}
