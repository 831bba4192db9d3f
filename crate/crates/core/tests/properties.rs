use proptest::prelude::*;

use twinbeam_core::analysis::{gamma, imbalance_bounds, solve_pump_x, BudgetData};
use twinbeam_core::detector::{analytic_moments, detected_moments, thin_joint};
use twinbeam_core::markers::{
    diff_analytic, diff_from_joint, epsilon_analytic, epsilon_from_joint, sigma2_closed_form,
    skellam_pmf, threshold_n,
};
use twinbeam_core::simshots::{sample_range, sample_series};
use twinbeam_core::{
    EfficiencyPair, ShotSeries, SimulationConfig, SourceKind, SourceSpec, Threshold, Truncation,
};

fn kind() -> impl Strategy<Value = SourceKind> {
    prop_oneof![
        Just(SourceKind::TwinBeam),
        Just(SourceKind::CoherentPair),
        Just(SourceKind::SplitThermal),
    ]
}

fn eta() -> impl Strategy<Value = f64> {
    0.05f64..=1.0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn joint_mass_is_retained_plus_tail(k in kind(), n in 0.0f64..3.0, tau in 0.05f64..0.95) {
        let spec = SourceSpec::new(k, n).unwrap().with_tau(tau).unwrap();
        let d = spec.single_mode_joint(Truncation::Auto(1e-10)).unwrap();
        prop_assert!(d.tail_mass() <= 1e-10 + 1e-14);
        prop_assert!((d.total() + d.tail_mass() - 1.0).abs() < 1e-13);
        prop_assert!(d.probs().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn thinning_preserves_mass(k in kind(), n in 0.0f64..3.0, e1 in eta(), e2 in eta()) {
        let spec = SourceSpec::new(k, n).unwrap();
        let d = spec.single_mode_joint(Truncation::Auto(1e-10)).unwrap();
        let t = thin_joint(&d, EfficiencyPair::new(e1, e2).unwrap()).unwrap();
        prop_assert!((t.total() - d.total()).abs() < 1e-13);
    }

    #[test]
    fn epsilon_in_unit_interval_and_matches_joint(
        k in kind(), n in 0.05f64..2.0, e1 in eta(), e2 in eta()
    ) {
        let e = EfficiencyPair::new(e1, e2).unwrap();
        let spec = SourceSpec::new(k, n).unwrap();
        let eps = epsilon_analytic(&spec, e).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&eps));
        let joint = thin_joint(&spec.single_mode_joint(Truncation::Auto(1e-13)).unwrap(), e).unwrap();
        let from_joint = epsilon_from_joint(&joint).unwrap();
        prop_assert!((eps - from_joint).abs() < 1e-7, "{eps} vs {from_joint}");
    }

    #[test]
    fn moments_scale_with_modes(k in kind(), n in 0.1f64..20.0, mu in 1u32..20, e1 in eta(), e2 in eta()) {
        let e = EfficiencyPair::new(e1, e2).unwrap();
        let multi = analytic_moments(&SourceSpec::new(k, n).unwrap().with_modes(mu).unwrap(), e).unwrap();
        let single = analytic_moments(&SourceSpec::new(k, n / mu as f64).unwrap(), e).unwrap();
        let m = mu as f64;
        for (a, b) in [
            (multi.mean1, single.mean1), (multi.var1, single.var1),
            (multi.var2, single.var2), (multi.cov, single.cov),
        ] {
            prop_assert!((a - m * b).abs() <= 1e-12 * a.abs().max(1.0));
        }
        let sig = sigma2_closed_form(k, e, n, m);
        prop_assert!((multi.diff_variance() - sig).abs() <= 1e-10 * sig.max(1.0));
    }

    #[test]
    fn balanced_difference_law_is_symmetric(k in kind(), n in 0.1f64..2.0, e in eta()) {
        let spec = SourceSpec::new(k, n).unwrap();
        let d = diff_analytic(&spec, EfficiencyPair::balanced(e).unwrap(), None, 1e-10).unwrap();
        for j in 1..=d.support().1 {
            prop_assert!((d.get(j) - d.get(-j)).abs() < 1e-13);
        }
    }

    #[test]
    fn twin_beam_below_shot_noise_exactly_under_threshold(
        n in 0.01f64..100.0, e1 in eta(), e2 in eta()
    ) {
        let e = EfficiencyPair::new(e1, e2).unwrap();
        let x = sigma2_closed_form(SourceKind::TwinBeam, e, n, 1.0);
        let a = sigma2_closed_form(SourceKind::CoherentPair, e, n, 1.0);
        match threshold_n(e).unwrap() {
            Threshold::Unbounded => prop_assert!(x <= a),
            Threshold::Finite(t) => {
                if n < t * (1.0 - 1e-9) { prop_assert!(x < a); }
                if n > t * (1.0 + 1e-9) { prop_assert!(x > a); }
            }
        }
    }

    #[test]
    fn thermal_never_below_shot_noise(n in 0.0f64..100.0, mu in 1u32..30, e1 in eta(), e2 in eta()) {
        let e = EfficiencyPair::new(e1, e2).unwrap();
        let nu = sigma2_closed_form(SourceKind::SplitThermal, e, n, mu as f64);
        prop_assert!(nu >= (e1 + e2) * n);
    }

    #[test]
    fn skellam_normalized(l1 in 0.0f64..8.0, l2 in 0.0f64..8.0) {
        let total: f64 = (-80..=80).map(|d| skellam_pmf(d, l1, l2)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pump_round_trip(
        e1 in 0.3f64..1.0, e2 in 0.3f64..1.0, m in 1e3f64..1e8, excess in 0.0f64..0.5,
        mu in 1u32..40, k in kind(),
    ) {
        let e = EfficiencyPair::new(e1, e2).unwrap();
        let mut data = BudgetData { kind: k, sigma2_measured: 0.0, m1: m * e1, m2: m * e2, mu };
        let theory = data.theory(e);
        data.sigma2_measured = theory * (1.0 + excess);
        let sol = solve_pump_x(&data, e).unwrap();
        prop_assert!(sol.x >= 0.0);
        let forward = theory + sol.x * sol.x * data.excess_coefficient(e);
        prop_assert!((forward - data.sigma2_measured).abs() <= 1e-10 * data.sigma2_measured);
    }

    #[test]
    fn imbalance_solutions_reproduce_variance(
        eta_nom in 0.3f64..0.9, delta in 0.0f64..0.2, m in 1e3f64..1e8, mu in 1u32..30,
        k in prop_oneof![Just(SourceKind::TwinBeam), Just(SourceKind::SplitThermal)],
    ) {
        let e = EfficiencyPair::new(eta_nom, (eta_nom + delta).min(1.0)).unwrap();
        let sigma2 = sigma2_closed_form(k, e, m, mu as f64);
        let data = BudgetData { kind: k, sigma2_measured: sigma2, m1: m * e.eta1, m2: m * e.eta2, mu };
        if let Ok(iv) = imbalance_bounds(&data, eta_nom) {
            prop_assert!(iv.lo <= iv.hi);
            for s in &iv.solutions {
                prop_assert!((s.sigma2_model - sigma2).abs() <= 1e-10 * sigma2);
            }
        }
    }

    #[test]
    fn correlation_function_is_bounded(
        values in prop::collection::vec((0u32..50, 0u32..50), 20..200), lag in -5i64..=5,
    ) {
        let (a, b): (Vec<f64>, Vec<f64>) = values.iter().map(|&(x, y)| (x as f64, y as f64)).unzip();
        let s = ShotSeries::from_counts(a, b).unwrap();
        if let Ok(g) = gamma(&s, lag) {
            // the lagged sum covers K - |lag| shots but is normalized by full-series spreads
            let k = s.len() as f64;
            prop_assert!(g.abs() <= k / (k - lag.abs() as f64) + 1e-12);
        }
    }

    #[test]
    fn sharding_does_not_change_shots(
        k in kind(), split in 1usize..60, seed in any::<u64>(), mu in 1u32..4,
    ) {
        let spec = SourceSpec::new(k, 3.0).unwrap().with_modes(mu).unwrap();
        let cfg = SimulationConfig::new(spec, EfficiencyPair::new(0.7, 0.8).unwrap(), 60, seed);
        let whole = sample_range(&cfg, 0..60);
        let mut parts = sample_range(&cfg, split..60);
        let mut head = sample_range(&cfg, 0..split);
        head.append(&mut parts);
        prop_assert_eq!(whole, head);
    }
}

#[test]
fn detected_moments_of_thinned_joint_match_analytic() {
    let e = EfficiencyPair::new(0.4, 0.9).unwrap();
    for k in SourceKind::ALL {
        let spec = SourceSpec::new(k, 1.5).unwrap().with_tau(0.3).unwrap();
        let joint = thin_joint(&spec.single_mode_joint(Truncation::Auto(1e-14)).unwrap(), e).unwrap();
        let a = analytic_moments(&spec, e).unwrap();
        let m = detected_moments(&joint);
        for (x, y) in [(a.mean1, m.mean1), (a.var2, m.var2), (a.cov, m.cov)] {
            assert!((x - y).abs() < 1e-9, "{k:?}: {x} vs {y}");
        }
        let d = diff_from_joint(&joint);
        assert!((d.variance() - a.diff_variance()).abs() < 1e-9);
    }
}

#[test]
fn same_seed_same_series() {
    let spec = SourceSpec::twin_beam(5.0).unwrap().with_modes(3).unwrap();
    let cfg = SimulationConfig::new(spec, EfficiencyPair::new(0.6, 0.7).unwrap(), 500, 42);
    assert_eq!(sample_series(&cfg).unwrap(), sample_series(&cfg).unwrap());
    let other = SimulationConfig { seed: 43, ..cfg };
    assert_ne!(sample_series(&cfg).unwrap(), sample_series(&other).unwrap());
}
