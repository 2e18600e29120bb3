//! Monte Carlo estimators of `u(t, x)` on branching Brownian motion trees.
//!
//! Every estimator runs `n_replicates` independent trees keyed by
//! [`SeedScheme`], maps each to one real value, and summarises the values in
//! replicate order with compensated summation. The result is identical for
//! any number of workers.
//!
//! Conditional voting, the product functional and recursive propagation are
//! multilinear in the leaf values, so each leaf contributes the heat average
//! of `g` over its final Brownian segment ([`InitialDatum::heat_average`])
//! rather than `g` at a sampled endpoint. This conditions on the tree and its
//! branching positions only, and leaves every estimator unbiased.

mod counts;
mod datum;
mod estimators;

pub use counts::{poisson_binomial, CountDistribution};
pub use datum::{DatumError, InitialDatum};
pub use estimators::{
    estimate_max_cdf, estimate_mckean_product, estimate_recursive, estimate_threshold,
    estimate_voting, voting_replicates, ThresholdMode, VotingMode,
};

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::bbm::{BbmError, NodeKey, SeedScheme, DEFAULT_POPULATION_CAP};

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Bbm(#[from] BbmError),
    #[error(
        "initial datum {datum} has range [{lo}, {hi}], but voting estimators need values in [0, 1]"
    )]
    DatumRange { datum: String, lo: f64, hi: f64 },
    #[error("replicate {replicate} produced a non-finite value; the propagated values overflowed, try a smaller t")]
    NonFinite { replicate: u64 },
    #[error("{0}")]
    Model(String),
    #[error("at least one replicate is required")]
    NoReplicates,
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CiMethod {
    Normal,
    /// Wilson score interval, for 0/1 valued replicates near the boundary.
    Wilson,
}

/// Replicate count, seeding and parallelism of one estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampling {
    pub n_replicates: u64,
    pub seed: u64,
    /// 0 uses every available core.
    pub workers: usize,
    pub population_cap: usize,
    pub ci: CiMethod,
    pub confidence: f64,
}

impl Sampling {
    pub fn new(n_replicates: u64, seed: u64) -> Self {
        Self {
            n_replicates,
            seed,
            workers: 0,
            population_cap: DEFAULT_POPULATION_CAP,
            ci: CiMethod::Normal,
            confidence: 0.95,
        }
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_replicates: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Sample variance of the replicate values.
    pub variance: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Estimate {
    pub fn from_values(values: &[f64], ci: CiMethod, confidence: f64) -> Estimate {
        let n = values.len();
        // shifted by the first value, so constant samples come back exactly
        let shift = values.first().copied().unwrap_or(0.0);
        let mean = shift + compensated_sum(values.iter().map(|v| v - shift)) / n as f64;
        let variance = if n > 1 {
            compensated_sum(values.iter().map(|v| (v - mean).powi(2))) / (n - 1) as f64
        } else {
            0.0
        };
        let std_error = (variance / n as f64).sqrt();
        let z = normal_quantile(0.5 + confidence / 2.0);
        let (ci_low, ci_high) = match ci {
            CiMethod::Normal => (mean - z * std_error, mean + z * std_error),
            CiMethod::Wilson => wilson(mean, n as f64, z),
        };
        Estimate {
            mean,
            std_error,
            n_replicates: n as u64,
            ci_low,
            ci_high,
            variance,
            warnings: Vec::new(),
        }
    }

    /// `|mean - reference| / std_error`; zero when both the error and the gap vanish.
    pub fn z_score(&self, reference: f64) -> f64 {
        let gap = self.mean - reference;
        if gap == 0.0 {
            0.0
        } else {
            gap / self.std_error
        }
    }
}

fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(p)
}

fn wilson(p: f64, n: f64, z: f64) -> (f64, f64) {
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (center - half, center + half)
}

/// Neumaier summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Evaluates `job` on every replicate key, returning values in replicate order.
pub fn replicate_values<T, F>(sampling: &Sampling, job: F) -> Result<Vec<T>, EstimateError>
where
    T: Send,
    F: Fn(u64, NodeKey) -> Result<T, EstimateError> + Sync,
{
    if sampling.n_replicates == 0 {
        return Err(EstimateError::NoReplicates);
    }
    let seeds = SeedScheme::new(sampling.seed);
    let n = sampling.n_replicates;
    if sampling.workers == 1 {
        return (0..n).map(|i| job(i, seeds.replicate(i))).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sampling.workers)
        .build()
        .map_err(|e| EstimateError::Pool(e.to_string()))?;
    pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| job(i, seeds.replicate(i)))
            .collect()
    })
}

/// One row of estimator output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    pub x: f64,
    pub t: f64,
    pub mean: f64,
    pub std_error: f64,
    pub n: u64,
    pub mode: String,
    pub model: String,
}
