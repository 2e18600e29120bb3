use proptest::prelude::*;

use voting_bbm::bbm::GenealogyParams;
use voting_bbm::estimate::{
    estimate_mckean_product, estimate_recursive, estimate_threshold, estimate_voting,
    voting_replicates, InitialDatum, Sampling, ThresholdMode, VotingMode,
};
use voting_bbm::models::{
    catalog, compile_outcome, compile_recursive, compile_threshold, default_outcome_rate,
    default_threshold_rate, forward_nonlinearity, validate, CatalogName, CatalogParams, Model,
    ModelDocument, OffspringDistribution,
};
use voting_bbm::pde::{solve, Grid1D, SolveConfig};
use voting_bbm::poly::{bernstein_basis, Polynomial};

fn poly(c: &[f64]) -> Polynomial {
    Polynomial::new(c.to_vec()).unwrap()
}

/// `f(0) = f(1) = 0` with inner coefficients in [-5, 5]; the top one absorbs the sum.
fn boundary_polynomial() -> impl Strategy<Value = Polynomial> {
    (2usize..=8)
        .prop_flat_map(|d| proptest::collection::vec(-5.0f64..=5.0, d - 1))
        .prop_filter_map("top coefficient out of range", |inner| {
            let top = -inner.iter().sum::<f64>();
            if top.abs() > 5.0 || top.abs() < 1e-3 {
                return None;
            }
            let mut c = vec![0.0];
            c.extend(inner);
            c.push(top);
            Some(poly(&c))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bernstein_endpoints_are_exact(coeffs in proptest::collection::vec(-5.0f64..5.0, 1..=13), extra in 0usize..4) {
        let p = poly(&coeffs);
        let order = p.degree().max(1) + extra;
        let b = p.to_bernstein(order).unwrap();
        prop_assert_eq!(b.coeffs()[0], p.eval(0.0));
        prop_assert_eq!(b.coeffs()[order], p.eval(1.0));
        let back = Polynomial::from_bernstein(&b);
        prop_assert!(back.max_coeff_diff(&p) <= 1e-9);
    }

    #[test]
    fn basis_sums_to_one(n in 1usize..=40, u in 0.0f64..=1.0) {
        let s: f64 = (0..=n).map(|k| bernstein_basis(k, n, u)).sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compilers_invert_the_forward_map(f in boundary_polynomial()) {
        let outcome = compile_outcome(&f, None).unwrap();
        let b = f.to_bernstein(f.degree()).unwrap();
        prop_assert!(outcome.rate >= default_outcome_rate(&b) - 1e-12);
        let outcome: Model = outcome.into();
        prop_assert!(validate(&outcome).is_valid());
        prop_assert!(forward_nonlinearity(&outcome).max_coeff_diff(&f) <= 1e-9);

        let threshold = compile_threshold(&f, None).unwrap();
        prop_assert!(threshold.rate >= default_threshold_rate(&b) - 1e-12);
        let alpha = threshold.cumulative_alpha();
        prop_assert!(alpha.windows(2).all(|w| w[0] <= w[1]));
        let threshold: Model = threshold.into();
        prop_assert!(validate(&threshold).is_valid());
        prop_assert!(forward_nonlinearity(&threshold).max_coeff_diff(&f) <= 1e-9);

        let recursive: Model = compile_recursive(&f).unwrap().into();
        prop_assert!(forward_nonlinearity(&recursive).max_coeff_diff(&f) <= 1e-9);
    }

    #[test]
    fn monotone_outcome_models_convert_both_ways(f in boundary_polynomial()) {
        let outcome = compile_outcome(&f, None).unwrap();
        prop_assume!(validate(&outcome.clone().into()).monotone);
        let threshold = outcome.to_threshold().unwrap();
        let back = threshold.to_outcome().unwrap();
        for (n, a) in &outcome.alpha {
            let b = &back.alpha[n];
            prop_assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 4.0 * f64::EPSILON));
        }
        let gap = forward_nonlinearity(&outcome.into()).max_coeff_diff(&forward_nonlinearity(&threshold.into()));
        prop_assert!(gap <= 1e-10);
    }

    #[test]
    fn documents_round_trip(f in boundary_polynomial(), kind in 0usize..3) {
        let model: Model = match kind {
            0 => compile_outcome(&f, None).unwrap().into(),
            1 => compile_threshold(&f, None).unwrap().into(),
            _ => compile_recursive(&f).unwrap().into(),
        };
        let text = ModelDocument::write(&model);
        let read = ModelDocument::read(&text).unwrap();
        prop_assert_eq!(&read, &model);
        prop_assert_eq!(ModelDocument::write(&read), text);
    }

    #[test]
    fn evs_is_a_positive_multiple_of_its_shape(n in 2usize..=5, chi_scale in 1.0f64..4.0, gamma_frac in 0.05f64..=1.0) {
        let chi = chi_scale / n as f64;
        let Model::Composite(largest) = catalog(CatalogName::Evs, &CatalogParams { n: Some(n), chi: Some(chi), ..Default::default() }).unwrap() else {
            unreachable!()
        };
        // the default gamma is the bound; scale below it
        let arity = largest.arity;
        let bound = largest.label("I").unwrap().alpha[1] * arity as f64 - 1.0;
        let params = CatalogParams { n: Some(n), chi: Some(chi), gamma: Some(gamma_frac * bound), ..Default::default() };
        let f = forward_nonlinearity(&catalog(CatalogName::Evs, &params).unwrap());
        let shape = poly(&[0.0, 1.0]).sub(&Polynomial::monomial(1.0, n)).mul(&poly(&[1.0]).add(&Polynomial::monomial(chi * n as f64, n - 1)));
        let factor = f.coeff(1) / shape.coeff(1);
        prop_assert!(factor > 0.0);
        prop_assert!(f.max_coeff_diff(&shape.scale(factor)) <= 1e-9);
    }

    #[test]
    fn conditional_root_probabilities_stay_in_unit_interval(x in -2.0f64..2.0, t in 0.0f64..1.5, seed in 0u64..1000) {
        let s = Sampling::new(64, seed).workers(1);
        let models = [
            catalog(CatalogName::EfpAllenCahn, &CatalogParams::default()).unwrap(),
            catalog(CatalogName::Evs, &CatalogParams { n: Some(2), chi: Some(2.0), ..Default::default() }).unwrap(),
            catalog(CatalogName::UniformBias, &CatalogParams { offspring: Some(OffspringDistribution::new([(2, 0.3), (4, 0.7)]).unwrap()), ..Default::default() }).unwrap(),
        ];
        for model in &models {
            for g in [InitialDatum::step(), InitialDatum::Gaussian { center: 0.0, width: 0.5, height: 1.0 }] {
                let values = voting_replicates(model, &g, t, &[x], &s, VotingMode::Conditional).unwrap();
                prop_assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn pde_keeps_unit_interval(f in boundary_polynomial(), center in -2.0f64..2.0) {
        let grid = Grid1D::with_spacing(-8.0, 8.0, 0.1).unwrap();
        let cfg = SolveConfig { snapshot_every: Some(0.1), ..SolveConfig::default() };
        let g = InitialDatum::Interval { a: center - 1.0, b: center + 1.0 };
        let s = solve(&f, &g, grid, 0.5, &cfg).unwrap();
        for snap in &s.snapshots {
            prop_assert!(snap.values.iter().all(|v| (-1e-8..=1.0 + 1e-8).contains(v)));
        }
    }
}

#[test]
fn zero_time_returns_the_datum() {
    let g = InitialDatum::Gaussian {
        center: 0.3,
        width: 0.8,
        height: 0.9,
    };
    let x = 0.1;
    let exact = g.eval(&[x]);
    let s = Sampling::new(10, 4);
    let f = poly(&[0.0, 1.0, -1.0]);
    let outcome: Model = compile_outcome(&f, None).unwrap().into();
    let threshold = compile_threshold(&f, None).unwrap();
    let recursive = compile_recursive(&f).unwrap();
    let binary = GenealogyParams::pure(1.0, 2).unwrap();
    assert_eq!(
        estimate_voting(&outcome, &g, 0.0, &[x], &s, VotingMode::Conditional)
            .unwrap()
            .mean,
        exact
    );
    // sampled votes are 0/1, so they are exact only for 0/1 data
    let step = InitialDatum::step();
    for (x, value) in [(-1.0, 1.0), (1.0, 0.0)] {
        assert_eq!(
            estimate_voting(&outcome, &step, 0.0, &[x], &s, VotingMode::Sampled)
                .unwrap()
                .mean,
            value
        );
        assert_eq!(
            estimate_threshold(&threshold, &step, 0.0, &[x], &s, ThresholdMode::Direct)
                .unwrap()
                .mean,
            value
        );
    }
    assert_eq!(
        estimate_threshold(&threshold, &g, 0.0, &[x], &s, ThresholdMode::ViaOutcome)
            .unwrap()
            .mean,
        exact
    );
    assert_eq!(
        estimate_recursive(&recursive, &g, 0.0, &[x], &s)
            .unwrap()
            .mean,
        exact
    );
    assert_eq!(
        estimate_mckean_product(&binary, &g, 0.0, &[x], &s)
            .unwrap()
            .mean,
        exact
    );
}
