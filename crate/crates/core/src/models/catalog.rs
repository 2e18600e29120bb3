//! Named model constructions.
//!
//! | name             | rule                                                        | nonlinearity                          |
//! |------------------|-------------------------------------------------------------|---------------------------------------|
//! | `heat`           | `alpha_kn = k/n`                                            | `0`                                   |
//! | `efp_allen_cahn` | ternary majority                                            | `u(1-u)(2u-1)`                        |
//! | `mckean`         | vote 1 iff some child voted 1                               | `beta (1 - u - sum p_k (1-u)^k)`      |
//! | `uniform_bias`   | `alpha_kn = (1+gamma) k/n` for `k < n`                      | `beta gamma sum p_n (u - u^n)`        |
//! | `group`          | `k/n + gamma C(k,m)/C(n,m)` for `m <= k < n`                | `beta gamma sum p_n (u^m - u^n)`      |
//! | `evs`            | labels `I` (uniform bias) and `G` (group, `m = n`), arity `2n-1` | multiple of `(u-u^n)(1+chi n u^(n-1))` |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use super::{
    CompositeLabelModel, Label, Model, ModelError, OffspringDistribution, RandomOutcomeModel,
    PROB_TOL,
};
use crate::poly::binom_f;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CatalogName {
    Heat,
    EfpAllenCahn,
    McKean,
    UniformBias,
    Group,
    Evs,
}

impl CatalogName {
    pub const ALL: [CatalogName; 6] = [
        CatalogName::Heat,
        CatalogName::EfpAllenCahn,
        CatalogName::McKean,
        CatalogName::UniformBias,
        CatalogName::Group,
        CatalogName::Evs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CatalogName::Heat => "heat",
            CatalogName::EfpAllenCahn => "efp_allen_cahn",
            CatalogName::McKean => "mckean",
            CatalogName::UniformBias => "uniform_bias",
            CatalogName::Group => "group",
            CatalogName::Evs => "evs",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            CatalogName::Heat => "unbiased voting; heat equation (params: offspring, rate)",
            CatalogName::EfpAllenCahn => "ternary majority; Allen-Cahn u(1-u)(2u-1) (params: rate)",
            CatalogName::McKean => "at-least-one rule; McKean nonlinearity (params: offspring, rate)",
            CatalogName::UniformBias => "uniform bias gamma; beta*gamma*sum p_n (u - u^n) (params: offspring, rate, gamma)",
            CatalogName::Group => "group bias of size m; beta*gamma*sum p_n (u^m - u^n) (params: m, offspring, rate, gamma)",
            CatalogName::Evs => "Ebert-van Saarloos composite (params: n, chi, gamma)",
        }
    }
}

impl fmt::Display for CatalogName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CatalogName {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == key)
            .or(match key.as_str() {
                "efp" | "allen_cahn" => Some(CatalogName::EfpAllenCahn),
                "ebert_van_saarloos" => Some(CatalogName::Evs),
                _ => None,
            })
            .ok_or_else(|| ModelError::UnknownCatalog(s.to_string()))
    }
}

/// Parameters for [`catalog`]; unused fields are ignored, missing ones take defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CatalogParams {
    /// Offspring law (default: binary branching).
    pub offspring: Option<OffspringDistribution>,
    /// Branching rate (default 1).
    pub rate: Option<f64>,
    /// Bias strength (default: the largest admissible value).
    pub gamma: Option<f64>,
    /// Group size for `group`.
    pub m: Option<usize>,
    /// Half-arity parameter for `evs`; the tree is `(2n-1)`-ary.
    pub n: Option<usize>,
    /// Shape parameter for `evs`.
    pub chi: Option<f64>,
}

pub fn catalog(name: CatalogName, params: &CatalogParams) -> Result<Model, ModelError> {
    let rate = params.rate.unwrap_or(1.0);
    if !(rate.is_finite() && rate > 0.0) {
        return Err(ModelError::Rate(rate));
    }
    let binary = || OffspringDistribution::pure(2).expect("binary law");
    match name {
        CatalogName::Heat => {
            let law = params.offspring.clone().unwrap_or_else(binary);
            let alpha = tables(&law, |k, n| k as f64 / n as f64);
            Ok(RandomOutcomeModel::new(rate, law, alpha)?.into())
        }
        CatalogName::EfpAllenCahn => {
            Ok(RandomOutcomeModel::pure(rate, vec![0.0, 0.0, 1.0, 1.0])?.into())
        }
        CatalogName::McKean => {
            let law = params.offspring.clone().unwrap_or_else(binary);
            let alpha = tables(&law, |k, _| if k == 0 { 0.0 } else { 1.0 });
            Ok(RandomOutcomeModel::new(rate, law, alpha)?.into())
        }
        CatalogName::UniformBias => {
            let law = params.offspring.clone().unwrap_or_else(binary);
            // the strictest bound comes from the largest arity
            let bound = 1.0 / (law.max_children() - 1) as f64;
            let gamma = params.gamma.unwrap_or(bound);
            if !(0.0..=bound + PROB_TOL).contains(&gamma) {
                return Err(ModelError::Parameter(format!(
                    "uniform_bias needs 0 <= gamma <= 1/(N-1) = {bound} for N = {}, got {gamma}",
                    law.max_children()
                )));
            }
            let alpha = tables(&law, |k, n| uniform_bias_entry(k, n, gamma));
            Ok(RandomOutcomeModel::new(rate, law, alpha)?.into())
        }
        CatalogName::Group => {
            let m = params
                .m
                .ok_or_else(|| ModelError::Parameter("group needs the group size m".into()))?;
            if m < 2 {
                return Err(ModelError::Parameter(format!("group needs m > 1, got {m}")));
            }
            let law = params
                .offspring
                .clone()
                .unwrap_or_else(|| OffspringDistribution::pure(m + 1).expect("arity within range"));
            if let Some(k) = law.support().find(|&k| k <= m) {
                return Err(ModelError::Parameter(format!(
                    "group needs p_k = 0 for k <= m = {m}, but p_{k} = {}",
                    law.prob(k)
                )));
            }
            let bound = law
                .support()
                .map(|n| group_gamma_bound(n, m))
                .fold(f64::INFINITY, f64::min);
            let gamma = params.gamma.unwrap_or(bound);
            if !(0.0..=bound + PROB_TOL).contains(&gamma) {
                return Err(ModelError::Parameter(format!(
                    "group needs 0 <= gamma <= {bound} so that k/n + gamma C(k,m)/C(n,m) <= 1, got {gamma}"
                )));
            }
            let alpha = tables(&law, |k, n| group_entry(k, n, m, gamma));
            Ok(RandomOutcomeModel::new(rate, law, alpha)?.into())
        }
        CatalogName::Evs => evs(params),
    }
}

fn tables(
    law: &OffspringDistribution,
    entry: impl Fn(usize, usize) -> f64,
) -> BTreeMap<usize, Vec<f64>> {
    law.support()
        .map(|n| (n, (0..=n).map(|k| entry(k, n)).collect()))
        .collect()
}

fn uniform_bias_entry(k: usize, n: usize, gamma: f64) -> f64 {
    if k == n {
        1.0
    } else {
        (1.0 + gamma) * k as f64 / n as f64
    }
}

fn group_entry(k: usize, n: usize, m: usize, gamma: f64) -> f64 {
    if k == n {
        1.0
    } else if k < m {
        k as f64 / n as f64
    } else {
        k as f64 / n as f64 + gamma * binom_f(k, m) / binom_f(n, m)
    }
}

/// Largest `gamma` with `k/n + gamma C(k,m)/C(n,m) <= 1` for all `m <= k <= n-1`.
fn group_gamma_bound(n: usize, m: usize) -> f64 {
    (m..n)
        .map(|k| (1.0 - k as f64 / n as f64) * binom_f(n, m) / binom_f(k, m))
        .fold(f64::INFINITY, f64::min)
}

fn evs(params: &CatalogParams) -> Result<Model, ModelError> {
    let n = params.n.unwrap_or(2);
    if n < 2 || 2 * n - 1 > crate::poly::MAX_DEGREE {
        return Err(ModelError::Parameter(format!(
            "evs needs 2 <= n <= 32, got {n}"
        )));
    }
    let chi = params.chi.unwrap_or(1.0);
    // odds of the group label; matching coefficients gives n*chi - 1
    let odds = n as f64 * chi - 1.0;
    if !(odds.is_finite() && odds >= -PROB_TOL) {
        return Err(ModelError::Parameter(format!(
            "evs needs n*chi - 1 >= 0 (chi >= 1/n = {}), got chi = {chi}",
            1.0 / n as f64
        )));
    }
    let odds = odds.max(0.0);
    let arity = 2 * n - 1;
    let bound = (1.0 / (arity - 1) as f64).min(group_gamma_bound(arity, n));
    let gamma = params.gamma.unwrap_or(bound);
    if !(gamma > 0.0 && gamma <= bound + PROB_TOL) {
        return Err(ModelError::Parameter(format!(
            "evs needs 0 < gamma <= {bound} so both label tables stay in [0, 1], got {gamma}"
        )));
    }
    let rate = params.rate.unwrap_or(1.0);
    let labels = vec![
        Label {
            name: "I".into(),
            probability: 1.0 / (1.0 + odds),
            alpha: (0..=arity)
                .map(|k| uniform_bias_entry(k, arity, gamma))
                .collect(),
        },
        Label {
            name: "G".into(),
            probability: odds / (1.0 + odds),
            alpha: (0..=arity)
                .map(|k| group_entry(k, arity, n, gamma))
                .collect(),
        },
    ];
    Ok(CompositeLabelModel::new(rate, arity, labels)?.into())
}
