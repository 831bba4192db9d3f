//! Sampler statistics against analytic values. Seeds are fixed; all bounds
//! are three standard errors estimated from the samples themselves.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use twinbeam_core::analysis::{
    batch_standard_error, epsilon_measured, fit_multithermal, gamma, measured_diff_variance,
};
use twinbeam_core::simshots::{pump_excess_variance, predicted_total_variance, sample_series};
use twinbeam_core::{
    EfficiencyPair, OutputMode, PumpModel, ShotSeries, SimulationConfig, SourceKind, SourceSpec,
};

const K: usize = 100_000;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

fn cov(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64
}

fn channel_var(s: &ShotSeries) -> twinbeam_core::Result<f64> {
    Ok(var(&s.ch1))
}

#[test]
fn perfect_twin_beam_copies_exactly() {
    let spec = SourceSpec::twin_beam(3.0).unwrap().with_modes(2).unwrap();
    let cfg = SimulationConfig::new(spec, EfficiencyPair::balanced(1.0).unwrap(), 20_000, 5);
    let s = sample_series(&cfg).unwrap();
    assert_eq!(s.ch1, s.ch2);
    assert!((gamma(&s, 0).unwrap() - 1.0).abs() < 1e-12);
    assert!(gamma(&s, 1).unwrap().abs() < 3.0 / (s.len() as f64).sqrt());
    assert_eq!(measured_diff_variance(&s).unwrap(), 0.0);
}

#[test]
fn coherent_channels_uncorrelated() {
    let spec = SourceSpec::coherent_pair(4.0).unwrap();
    let cfg = SimulationConfig::new(spec, EfficiencyPair::new(0.5, 0.9).unwrap(), K, 6);
    let s = sample_series(&cfg).unwrap();
    assert!(gamma(&s, 0).unwrap().abs() < 3.0 / (K as f64).sqrt());
}

#[test]
fn predicted_total_variance_matches_samples() {
    // η = 1 so counts equal photon numbers
    let spec = SourceSpec::twin_beam(1e4).unwrap().with_modes(14).unwrap();
    let cfg = SimulationConfig::new(spec, EfficiencyPair::balanced(1.0).unwrap(), K, 8)
        .with_pump(0.0224, PumpModel::Budget);
    let s = sample_series(&cfg).unwrap();
    let predicted = predicted_total_variance(&spec, 0.0224).unwrap();
    let sample = var(&s.ch1);
    let se = batch_standard_error(&s, 100, channel_var).unwrap();
    assert!(
        (sample - predicted).abs() <= 3.0 * se,
        "sample {sample}, predicted {predicted}, se {se}"
    );
}

#[test]
fn budget_pump_noise_matches_corrected_variance() {
    let n = 1e3;
    let e = EfficiencyPair::new(0.6, 0.7).unwrap();
    let x = 0.03;
    let spec = SourceSpec::twin_beam(n).unwrap().with_modes(14).unwrap();
    let cfg = SimulationConfig::new(spec, e, K, 9).with_pump(x, PumpModel::Budget);
    let s = sample_series(&cfg).unwrap();
    let excess = 2.0 * pump_excess_variance(SourceKind::TwinBeam, n, 14.0, x);
    let base = twinbeam_core::markers::sigma2_closed_form(SourceKind::TwinBeam, e, n, 14.0);
    let measured = measured_diff_variance(&s).unwrap();
    let se = batch_standard_error(&s, 100, measured_diff_variance).unwrap();
    assert!(
        (measured - base - excess).abs() <= 3.0 * se,
        "measured {measured}, predicted {}, se {se}",
        base + excess
    );
}

#[test]
fn common_mode_pump_raises_variances_and_covariance_together() {
    let n = 1e3;
    let e = EfficiencyPair::balanced(0.7).unwrap();
    let spec = SourceSpec::twin_beam(n).unwrap().with_modes(14).unwrap();
    let quiet = sample_series(&SimulationConfig::new(spec, e, K, 10)).unwrap();
    let noisy = sample_series(
        &SimulationConfig::new(spec, e, K, 10).with_pump(0.05, PumpModel::CommonMode),
    )
    .unwrap();
    assert!(var(&noisy.ch1) > 1.2 * var(&quiet.ch1));
    assert!(var(&noisy.ch2) > 1.2 * var(&quiet.ch2));
    assert!(cov(&noisy.ch1, &noisy.ch2) > 1.2 * cov(&quiet.ch1, &quiet.ch2));
    // at balanced efficiencies the shared scale cancels in the difference
    let (dq, dn) = (
        measured_diff_variance(&quiet).unwrap(),
        measured_diff_variance(&noisy).unwrap(),
    );
    let se = batch_standard_error(&noisy, 100, measured_diff_variance).unwrap();
    let expected = 2.0 * 0.7 * 0.3 * mean(&noisy.channel_counts(1)) / 0.7;
    assert!((dn - expected).abs() <= 3.0 * se, "{dn} vs {expected} (quiet {dq})");
}

#[test]
fn volts_output_round_trips_through_noise_subtraction() {
    let spec = SourceSpec::split_thermal(10.0).unwrap();
    let e = EfficiencyPair::balanced(0.71).unwrap();
    let out = OutputMode::Volts {
        alpha1: 6.7e-8,
        alpha2: 8.3e-8,
        noise_var1: 4e-15,
        noise_var2: 6e-15,
    };
    let s = sample_series(&SimulationConfig::new(spec, e, K, 11).with_output(out)).unwrap();
    let eps = epsilon_measured(&s).unwrap();
    let se = batch_standard_error(&s, 100, epsilon_measured).unwrap();
    let eps_th = twinbeam_core::markers::epsilon_analytic(&spec, e).unwrap();
    assert!((eps - eps_th).abs() <= 3.0 * se, "{eps} vs {eps_th} ± {se}");
    let d = measured_diff_variance(&s).unwrap();
    let d_se = batch_standard_error(&s, 100, measured_diff_variance).unwrap();
    assert!((d - 2.0 * 0.71 * 10.0).abs() <= 3.0 * d_se);
}

#[test]
fn multithermal_fit_recovers_synthetic_parameters() {
    for mu in [1u32, 5, 14, 15] {
        for v_t in [0.5, 1.0, 10.0] {
            let mut hits = 0;
            for seed in 0..4u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed * 1000 + mu as u64);
                let g = Gamma::new(mu as f64, v_t / mu as f64).unwrap();
                let samples: Vec<f64> = (0..K).map(|_| g.sample(&mut rng)).collect();
                let fit = fit_multithermal(&samples, true).unwrap();
                if fit.mu_hat == mu as f64 && (fit.v_t_hat - v_t).abs() <= 0.01 * v_t {
                    hits += 1;
                }
            }
            assert!(hits >= 4, "mu={mu} v_t={v_t}: {hits}/4");
        }
    }
}

#[test]
fn continuous_fit_is_close_to_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = Gamma::new(7.5, 2.0 / 7.5).unwrap();
    let samples: Vec<f64> = (0..K).map(|_| g.sample(&mut rng)).collect();
    let fit = fit_multithermal(&samples, false).unwrap();
    // sd of the shape estimate is about mu·√(2/K) ≈ 0.034
    assert!((fit.mu_hat - 7.5).abs() < 0.15, "{}", fit.mu_hat);
    assert!(fit.chi2_per_bin < 3.0, "{}", fit.chi2_per_bin);
}

#[test]
fn fit_clips_nonpositive_samples() {
    let mut samples: Vec<f64> = (1..=2000).map(|i| i as f64 / 1000.0).collect();
    samples[0] = -0.5;
    samples[1] = 0.0;
    let fit = fit_multithermal(&samples, true).unwrap();
    assert_eq!(fit.clipped, 2);
    assert!(fit.mu_hat >= 1.0 && fit.v_t_hat > 0.0);
}
