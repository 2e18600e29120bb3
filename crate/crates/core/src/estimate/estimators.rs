use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::{poisson_binomial, replicate_values, Estimate, EstimateError, InitialDatum, Sampling};
use crate::bbm::{fold_tree, AuxRng, BbmError, FoldOptions, GenealogyParams, LeafRecord, NodeKey};
use crate::models::{
    CompositeLabelModel, Model, OffspringDistribution, RandomOutcomeModel, RandomThresholdModel,
    RecursiveModel,
};

/// How votes travel up the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VotingMode {
    /// Draw every vote; replicate values are 0 or 1.
    Sampled,
    /// Propagate vote probabilities given the tree.
    #[default]
    Conditional,
}

impl fmt::Display for VotingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VotingMode::Sampled => "sampled",
            VotingMode::Conditional => "conditional",
        })
    }
}

impl FromStr for VotingMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sampled" => Ok(VotingMode::Sampled),
            "conditional" => Ok(VotingMode::Conditional),
            other => Err(format!(
                "unknown voting mode `{other}` (expected sampled or conditional)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdMode {
    /// Draw a threshold at every vertex and compare it with the 1-count.
    #[default]
    Direct,
    /// Convert to the equivalent outcome model and estimate conditionally.
    ViaOutcome,
}

impl fmt::Display for ThresholdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdMode::Direct => "direct",
            ThresholdMode::ViaOutcome => "via-outcome",
        })
    }
}

impl FromStr for ThresholdMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "direct" => Ok(ThresholdMode::Direct),
            "via-outcome" | "via_outcome" => Ok(ThresholdMode::ViaOutcome),
            other => Err(format!(
                "unknown threshold mode `{other}` (expected direct or via-outcome)"
            )),
        }
    }
}

fn genealogy(
    rate: f64,
    offspring: OffspringDistribution,
    x: &[f64],
) -> Result<GenealogyParams, EstimateError> {
    Ok(GenealogyParams::new(rate, offspring, x.len())?)
}

/// Leaf value with the final Brownian segment integrated out where possible.
fn leaf_average(g: &InitialDatum, leaf: &LeafRecord<'_>) -> f64 {
    g.heat_average(leaf.origin, leaf.segment)
        .unwrap_or_else(|| g.eval(leaf.position))
}

fn require_probability(g: &InitialDatum) -> Result<(), EstimateError> {
    if g.is_probability() {
        Ok(())
    } else {
        let (lo, hi) = g.range();
        Err(EstimateError::DatumRange {
            datum: g.to_string(),
            lo,
            hi,
        })
    }
}

fn options(sampling: &Sampling) -> FoldOptions {
    FoldOptions {
        population_cap: sampling.population_cap,
    }
}

fn summarise(values: &[f64], sampling: &Sampling) -> Estimate {
    Estimate::from_values(values, sampling.ci, sampling.confidence)
}

enum Tables<'a> {
    Outcome(&'a RandomOutcomeModel),
    Composite {
        model: &'a CompositeLabelModel,
        mixed: Vec<f64>,
    },
}

impl Tables<'_> {
    fn sampled(&self, n: usize, aux: &mut AuxRng) -> &[f64] {
        match self {
            Tables::Outcome(m) => m.table(n).expect("validated support"),
            Tables::Composite { model, .. } => {
                let u: f64 = aux.random();
                let mut acc = 0.0;
                for label in &model.labels {
                    acc += label.probability;
                    if u < acc {
                        return &label.alpha;
                    }
                }
                &model.labels[model.labels.len() - 1].alpha
            }
        }
    }

    fn conditional(&self, n: usize) -> &[f64] {
        match self {
            Tables::Outcome(m) => m.table(n).expect("validated support"),
            Tables::Composite { mixed, .. } => mixed,
        }
    }
}

fn vote_tree(
    params: &GenealogyParams,
    tables: &Tables<'_>,
    g: &InitialDatum,
    t: f64,
    x: &[f64],
    key: NodeKey,
    opts: FoldOptions,
    mode: VotingMode,
) -> Result<f64, BbmError> {
    match mode {
        VotingMode::Sampled => fold_tree(
            params,
            t,
            x,
            key,
            opts,
            |leaf, aux| aux.random::<f64>() < g.eval(leaf.position),
            |_, kids, aux| {
                let k = kids.iter().filter(|&&v| v).count();
                let alpha = tables.sampled(kids.len(), aux)[k];
                aux.random::<f64>() < alpha
            },
        )
        .map(f64::from),
        VotingMode::Conditional => fold_tree(
            params,
            t,
            x,
            key,
            opts,
            |leaf, _| leaf_average(g, leaf),
            |_, kids, _| {
                poisson_binomial(&kids)
                    .expect(tables.conditional(kids.len()))
                    .clamp(0.0, 1.0)
            },
        ),
    }
}

/// `u(t, x) = P_x(root votes 1)` for outcome and composite models; threshold
/// models are converted to their outcome form.
pub fn estimate_voting(
    model: &Model,
    g: &InitialDatum,
    t: f64,
    x: &[f64],
    sampling: &Sampling,
    mode: VotingMode,
) -> Result<Estimate, EstimateError> {
    let values = voting_replicates(model, g, t, x, sampling, mode)?;
    Ok(summarise(&values, sampling))
}

/// Per-replicate values behind [`estimate_voting`], in replicate order.
///
/// Both modes walk the same trees for the same seed, so the two vectors pair up.
pub fn voting_replicates(
    model: &Model,
    g: &InitialDatum,
    t: f64,
    x: &[f64],
    sampling: &Sampling,
    mode: VotingMode,
) -> Result<Vec<f64>, EstimateError> {
    require_probability(g)?;
    let converted;
    let (params, tables) = match model {
        Model::Outcome(m) => (
            genealogy(m.rate, m.offspring.clone(), x)?,
            Tables::Outcome(m),
        ),
        Model::Composite(m) => (
            genealogy(m.rate, m.offspring(), x)?,
            Tables::Composite {
                model: m,
                mixed: m.mixed_alpha(),
            },
        ),
        Model::Threshold(m) => {
            converted = m
                .to_outcome()
                .map_err(|e| EstimateError::Model(e.to_string()))?;
            (
                genealogy(converted.rate, converted.offspring.clone(), x)?,
                Tables::Outcome(&converted),
            )
        }
        Model::Recursive(_) => {
            return Err(EstimateError::Model(
                "recursive models propagate values, not votes; use the recursive estimator".into(),
            ))
        }
    };
    let opts = options(sampling);
    replicate_values(sampling, |_, key| {
        Ok(vote_tree(&params, &tables, g, t, x, key, opts, mode)?)
    })
}

fn sample_threshold(zeta: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (j, z) in zeta.iter().enumerate() {
        acc += z;
        if u < acc {
            return j;
        }
    }
    zeta.len() - 1
}

/// Threshold voting: a vertex votes 1 iff at least `L ~ zeta` of its children did.
pub fn estimate_threshold(
    model: &RandomThresholdModel,
    g: &InitialDatum,
    t: f64,
    x: &[f64],
    sampling: &Sampling,
    mode: ThresholdMode,
) -> Result<Estimate, EstimateError> {
    if mode == ThresholdMode::ViaOutcome {
        let outcome = model
            .to_outcome()
            .map_err(|e| EstimateError::Model(e.to_string()))?;
        return estimate_voting(&outcome.into(), g, t, x, sampling, VotingMode::Conditional);
    }
    require_probability(g)?;
    let offspring = OffspringDistribution::pure(model.arity)
        .map_err(|e| EstimateError::Model(e.to_string()))?;
    let params = genealogy(model.rate, offspring, x)?;
    let opts = options(sampling);
    let values = replicate_values(sampling, |_, key| {
        let vote = fold_tree(
            &params,
            t,
            x,
            key,
            opts,
            |leaf, aux| aux.random::<f64>() < g.eval(leaf.position),
            |_, kids, aux| {
                let k = kids.iter().filter(|&&v| v).count();
                k >= sample_threshold(&model.zeta, aux.random())
            },
        )?;
        Ok(f64::from(vote))
    })?;
    Ok(summarise(&values, sampling))
}

/// `E_x[u_root]` with `u_parent = S_N(children) + mean(children)` at unit rate.
pub fn estimate_recursive(
    model: &RecursiveModel,
    g: &InitialDatum,
    t: f64,
    x: &[f64],
    sampling: &Sampling,
) -> Result<Estimate, EstimateError> {
    let offspring = OffspringDistribution::pure(model.arity)
        .map_err(|e| EstimateError::Model(e.to_string()))?;
    let params = genealogy(RecursiveModel::RATE, offspring, x)?;
    let opts = options(sampling);
    let values = replicate_values(sampling, |replicate, key| {
        let v = fold_tree(
            &params,
            t,
            x,
            key,
            opts,
            |leaf, _| leaf_average(g, leaf),
            |_, kids, _| model.combine(&kids),
        )?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EstimateError::NonFinite { replicate })
        }
    })?;
    let mut estimate = summarise(&values, sampling);
    let kurtosis = kurtosis(&values, estimate.mean);
    if kurtosis > 10.0 {
        estimate.warnings.push(format!(
            "replicate values have kurtosis {kurtosis:.1}; the standard error may be unreliable"
        ));
    }
    Ok(estimate)
}

fn kurtosis(values: &[f64], mean: f64) -> f64 {
    let n = values.len() as f64;
    let m2 = super::compensated_sum(values.iter().map(|v| (v - mean).powi(2))) / n;
    let m4 = super::compensated_sum(values.iter().map(|v| (v - mean).powi(4))) / n;
    if m2 > 0.0 {
        m4 / (m2 * m2)
    } else {
        0.0
    }
}

/// `E_x[prod_leaves g(X_m(t))]`, which solves `v_t = Δv + β sum_k p_k (v^k - v)`.
pub fn estimate_mckean_product(
    params: &GenealogyParams,
    g: &InitialDatum,
    t: f64,
    x: &[f64],
    sampling: &Sampling,
) -> Result<Estimate, EstimateError> {
    let opts = options(sampling);
    let values = replicate_values(sampling, |replicate, key| {
        let v = fold_tree(
            params,
            t,
            x,
            key,
            opts,
            |leaf, _| leaf_average(g, leaf),
            |_, kids, _| kids.iter().product(),
        )?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EstimateError::NonFinite { replicate })
        }
    })?;
    Ok(summarise(&values, sampling))
}

/// `P(M_t > x)` for each `x`, `M_t` the largest position among particles alive at `t`.
pub fn estimate_max_cdf(
    params: &GenealogyParams,
    t: f64,
    xs: &[f64],
    sampling: &Sampling,
) -> Result<Vec<Estimate>, EstimateError> {
    if params.dimension() != 1 {
        return Err(EstimateError::Model(
            "the maximum distribution is defined in dimension 1".into(),
        ));
    }
    let opts = options(sampling);
    let maxima = replicate_values(sampling, |_, key| {
        Ok(fold_tree(
            params,
            t,
            &[0.0],
            key,
            opts,
            |leaf, _| leaf.position[0],
            |_, kids, _| kids.into_iter().fold(f64::NEG_INFINITY, f64::max),
        )?)
    })?;
    Ok(xs
        .iter()
        .map(|&x| {
            let indicators: Vec<f64> = maxima.iter().map(|&m| f64::from(u8::from(m > x))).collect();
            summarise(&indicators, sampling)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{catalog, compile_recursive, CatalogName, CatalogParams};
    use crate::poly::Polynomial;

    fn heat() -> Model {
        catalog(CatalogName::Heat, &CatalogParams::default()).unwrap()
    }

    #[test]
    fn heat_at_origin_is_one_half() {
        let e = estimate_voting(
            &heat(),
            &InitialDatum::step(),
            1.0,
            &[0.0],
            &Sampling::new(20_000, 1),
            VotingMode::Conditional,
        )
        .unwrap();
        assert!((e.mean - 0.5).abs() < 3.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn heat_tail_matches_erfc() {
        // ½ erfc(1)
        let exact = 0.078_649_603_525_142_57;
        let e = estimate_voting(
            &heat(),
            &InitialDatum::step(),
            1.0,
            &[2.0],
            &Sampling::new(20_000, 2),
            VotingMode::Sampled,
        )
        .unwrap();
        assert!((e.mean - exact).abs() < 3.0 * e.std_error, "{e:?}");
    }

    #[test]
    fn time_zero_returns_datum() {
        let g = InitialDatum::Gaussian {
            center: 0.0,
            width: 1.0,
            height: 0.9,
        };
        let s = Sampling::new(50, 4);
        let target = g.eval(&[0.3]);
        let e = estimate_voting(&heat(), &g, 0.0, &[0.3], &s, VotingMode::Conditional).unwrap();
        assert_eq!((e.mean, e.std_error), (target, 0.0));
        let r = compile_recursive(&Polynomial::new(vec![0.0, 1.0, -1.0]).unwrap()).unwrap();
        let e = estimate_recursive(&r, &g, 0.0, &[0.3], &s).unwrap();
        assert_eq!((e.mean, e.std_error), (target, 0.0));
        let params = GenealogyParams::pure(1.0, 2).unwrap();
        let e = estimate_mckean_product(&params, &g, 0.0, &[0.3], &s).unwrap();
        assert_eq!((e.mean, e.std_error), (target, 0.0));
    }

    #[test]
    fn product_of_ones_is_one() {
        let params = GenealogyParams::pure(1.0, 2).unwrap();
        let e = estimate_mckean_product(
            &params,
            &InitialDatum::Constant(1.0),
            2.0,
            &[0.0],
            &Sampling::new(200, 3),
        )
        .unwrap();
        assert_eq!((e.mean, e.std_error), (1.0, 0.0));
    }

    #[test]
    fn cubic_blow_up_ode() {
        let r = compile_recursive(&Polynomial::monomial(1.0, 3)).unwrap();
        let e = estimate_recursive(
            &r,
            &InitialDatum::Constant(1.0),
            0.1,
            &[0.0],
            &Sampling::new(50_000, 5),
        )
        .unwrap();
        let exact = 1.0 / 0.8f64.sqrt();
        assert!((e.mean - exact).abs() < 3.0 * e.std_error + 1e-12, "{e:?}");
    }

    #[test]
    fn product_equals_mckean_voting_on_complement() {
        let law = OffspringDistribution::new([(2, 0.6), (3, 0.4)]).unwrap();
        let params = CatalogParams {
            offspring: Some(law.clone()),
            rate: Some(1.3),
            ..Default::default()
        };
        let mckean = catalog(CatalogName::McKean, &params).unwrap();
        let g = InitialDatum::Gaussian {
            center: 0.5,
            width: 1.0,
            height: 1.0,
        };
        let s = Sampling::new(2_000, 6);
        let gp = GenealogyParams::new(1.3, law, 1).unwrap();
        let v = estimate_mckean_product(&gp, &g, 1.0, &[0.2], &s).unwrap();
        let u = estimate_voting(
            &mckean,
            &g.clone().complement(),
            1.0,
            &[0.2],
            &s,
            VotingMode::Conditional,
        )
        .unwrap();
        assert!((u.mean - (1.0 - v.mean)).abs() < 1e-12);
    }

    #[test]
    fn majority_threshold_matches_efp() {
        let efp = catalog(CatalogName::EfpAllenCahn, &CatalogParams::default()).unwrap();
        let Model::Outcome(outcome) = &efp else {
            panic!()
        };
        let threshold = outcome.to_threshold().unwrap();
        assert_eq!(threshold.zeta, vec![0.0, 0.0, 1.0, 0.0]);
        let a = estimate_voting(
            &efp,
            &InitialDatum::step(),
            1.0,
            &[0.5],
            &Sampling::new(20_000, 7),
            VotingMode::Sampled,
        )
        .unwrap();
        let b = estimate_threshold(
            &threshold,
            &InitialDatum::step(),
            1.0,
            &[0.5],
            &Sampling::new(20_000, 8),
            ThresholdMode::Direct,
        )
        .unwrap();
        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.mean - b.mean).abs() < 3.0 * se, "{a:?} {b:?}");
    }

    #[test]
    fn direct_threshold_on_same_keys_is_the_sampled_outcome_vote() {
        // with a deterministic majority threshold both rules read the same aux draws at the leaves
        let efp = catalog(CatalogName::EfpAllenCahn, &CatalogParams::default()).unwrap();
        let Model::Outcome(outcome) = &efp else {
            panic!()
        };
        let threshold = outcome.to_threshold().unwrap();
        let s = Sampling::new(500, 9);
        let d = estimate_threshold(
            &threshold,
            &InitialDatum::step(),
            1.0,
            &[0.0],
            &s,
            ThresholdMode::Direct,
        )
        .unwrap();
        let v = estimate_voting(
            &efp,
            &InitialDatum::step(),
            1.0,
            &[0.0],
            &s,
            VotingMode::Sampled,
        )
        .unwrap();
        assert_eq!(d.mean, v.mean);
    }

    #[test]
    fn conditional_is_conditional_expectation_of_sampled() {
        let efp = catalog(CatalogName::EfpAllenCahn, &CatalogParams::default()).unwrap();
        let s = Sampling::new(10_000, 10);
        let g = InitialDatum::step();
        let sampled = estimate_voting(&efp, &g, 1.0, &[0.3], &s, VotingMode::Sampled).unwrap();
        let cond = estimate_voting(&efp, &g, 1.0, &[0.3], &s, VotingMode::Conditional).unwrap();
        assert!(cond.variance < sampled.variance);
        let se = (sampled.variance / s.n_replicates as f64).sqrt();
        assert!((sampled.mean - cond.mean).abs() < 3.0 * se);
    }

    #[test]
    fn composite_modes_agree() {
        let params = CatalogParams {
            n: Some(2),
            chi: Some(1.5),
            ..Default::default()
        };
        let evs = catalog(CatalogName::Evs, &params).unwrap();
        let g = InitialDatum::step();
        let a = estimate_voting(
            &evs,
            &g,
            1.0,
            &[0.5],
            &Sampling::new(20_000, 11),
            VotingMode::Sampled,
        )
        .unwrap();
        let b = estimate_voting(
            &evs,
            &g,
            1.0,
            &[0.5],
            &Sampling::new(20_000, 12),
            VotingMode::Conditional,
        )
        .unwrap();
        let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.mean - b.mean).abs() < 3.0 * se, "{a:?} {b:?}");
    }

    #[test]
    fn results_do_not_depend_on_workers() {
        let efp = catalog(CatalogName::EfpAllenCahn, &CatalogParams::default()).unwrap();
        let g = InitialDatum::step();
        let one = estimate_voting(
            &efp,
            &g,
            1.0,
            &[0.0],
            &Sampling::new(3_000, 13).workers(1),
            VotingMode::Conditional,
        )
        .unwrap();
        let four = estimate_voting(
            &efp,
            &g,
            1.0,
            &[0.0],
            &Sampling::new(3_000, 13).workers(4),
            VotingMode::Conditional,
        )
        .unwrap();
        assert_eq!(one, four);
        assert_eq!(one.mean.to_bits(), four.mean.to_bits());
    }

    #[test]
    fn max_cdf_far_left_is_one_and_monotone() {
        let params = GenealogyParams::pure(1.0, 2).unwrap();
        let xs = [-50.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        let est = estimate_max_cdf(&params, 1.0, &xs, &Sampling::new(5_000, 14)).unwrap();
        assert_eq!(est[0].mean, 1.0);
        assert!(est.windows(2).all(|w| w[0].mean >= w[1].mean));
    }

    #[test]
    fn voting_rejects_out_of_range_datum() {
        let r = estimate_voting(
            &heat(),
            &InitialDatum::Constant(1.5),
            1.0,
            &[0.0],
            &Sampling::new(10, 0),
            VotingMode::Sampled,
        );
        assert!(matches!(r, Err(EstimateError::DatumRange { .. })));
    }

    #[test]
    fn conditional_root_probabilities_stay_in_range() {
        let f = Polynomial::new(vec![0.0, 2.0, -7.0, 9.0, -4.0]).unwrap();
        let model: Model = crate::models::compile_outcome(&f, None).unwrap().into();
        let Model::Outcome(m) = &model else { panic!() };
        let params = genealogy(m.rate, m.offspring.clone(), &[0.0]).unwrap();
        let tables = Tables::Outcome(m);
        let seeds = crate::bbm::SeedScheme::new(15);
        for i in 0..300 {
            let v = vote_tree(
                &params,
                &tables,
                &InitialDatum::step(),
                1.0,
                &[0.2],
                seeds.replicate(i),
                FoldOptions::default(),
                VotingMode::Conditional,
            )
            .unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
    }
}
