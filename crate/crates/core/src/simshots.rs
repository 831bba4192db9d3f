//! Seeded Monte Carlo of per-shot detected counts (or voltages).
//!
//! Every shot draws from its own ChaCha stream selected by the shot index, so
//! a series is a pure function of the configuration and any sharding of the
//! shot range over workers reproduces it exactly.
//!
//! Per shot: optional pump excess noise, photon numbers for each of the `mu`
//! mode pairs, Bernoulli thinning of each beam, summation over modes and an
//! optional linear conversion to volts with Gaussian instrument noise.

use alloc::vec::Vec;
use core::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson, StandardNormal};

use crate::detector::EfficiencyPair;
use crate::error::{check_domain, Result};
use crate::math;
use crate::statekit::{SourceKind, SourceSpec};

/// How pump fluctuations enter the generated beams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PumpModel {
    /// Each channel receives an independent Gaussian excess whose variance is
    /// the linearized pump-noise propagation of [`pump_excess_variance`].
    /// This is the generative model inverted by
    /// [`crate::analysis::solve_pump_x`].
    #[default]
    Budget,
    /// One pump scale `s ~ N(1, x²)` per shot, shared by both beams and all
    /// modes, mapped through the source's gain law (`sinh²` for twin-beams,
    /// linear otherwise). Common to both beams, so it largely cancels in the
    /// difference photocurrent.
    CommonMode,
}

/// Output of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "unit", rename_all = "snake_case"))]
pub enum OutputMode {
    #[default]
    Counts,
    /// `v_j = alpha_j m_j + N(0, noise_var_j)`.
    Volts {
        alpha1: f64,
        alpha2: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        noise_var1: f64,
        #[cfg_attr(feature = "serde", serde(default))]
        noise_var2: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Unit {
    Counts,
    Volts,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimulationConfig {
    pub source: SourceSpec,
    pub eff: EfficiencyPair,
    pub shots: usize,
    pub seed: u64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub pump_x: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub pump_model: PumpModel,
    #[cfg_attr(feature = "serde", serde(default))]
    pub output: OutputMode,
}

impl SimulationConfig {
    pub fn new(source: SourceSpec, eff: EfficiencyPair, shots: usize, seed: u64) -> Self {
        Self {
            source,
            eff,
            shots,
            seed,
            pump_x: 0.0,
            pump_model: PumpModel::Budget,
            output: OutputMode::Counts,
        }
    }

    pub fn with_pump(mut self, x: f64, model: PumpModel) -> Self {
        self.pump_x = x;
        self.pump_model = model;
        self
    }

    pub fn with_output(mut self, output: OutputMode) -> Self {
        self.output = output;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.eff.validate()?;
        check_domain(self.shots >= 1, "shots", self.shots as f64, "shots >= 1")?;
        check_domain(
            self.pump_x >= 0.0 && self.pump_x.is_finite(),
            "pump_x",
            self.pump_x,
            "pump_x >= 0",
        )?;
        if let OutputMode::Volts {
            alpha1,
            alpha2,
            noise_var1,
            noise_var2,
        } = self.output
        {
            check_domain(alpha1 > 0.0, "alpha1", alpha1, "alpha1 > 0")?;
            check_domain(alpha2 > 0.0, "alpha2", alpha2, "alpha2 > 0")?;
            check_domain(noise_var1 >= 0.0, "noise_var1", noise_var1, "noise_var1 >= 0")?;
            check_domain(noise_var2 >= 0.0, "noise_var2", noise_var2, "noise_var2 >= 0")?;
        }
        Ok(())
    }

    /// Photon-number mean of each beam (summed over modes).
    pub fn beam_means(&self) -> (f64, f64) {
        let s = &self.source;
        match s.kind {
            SourceKind::SplitThermal => (2.0 * s.n_mean * s.tau, 2.0 * s.n_mean * (1.0 - s.tau)),
            _ => (s.n_mean, s.n_mean),
        }
    }
}

/// One simulated laser shot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shot {
    pub v1: f64,
    pub v2: f64,
    /// A Gaussian pump draw was clipped at zero.
    pub truncated: bool,
}

/// Two-channel record of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotSeries {
    pub unit: Unit,
    pub ch1: Vec<f64>,
    pub ch2: Vec<f64>,
    /// Volts per detected photon, required in volts mode.
    pub conv: Option<(f64, f64)>,
    /// Instrument-noise variances, in the unit of the series.
    pub noise_var: (f64, f64),
    /// Number of shots whose pump draw was clipped at zero.
    pub truncations: u64,
}

impl ShotSeries {
    pub fn new(
        unit: Unit,
        ch1: Vec<f64>,
        ch2: Vec<f64>,
        conv: Option<(f64, f64)>,
        noise_var: (f64, f64),
    ) -> Result<Self> {
        check_domain(
            ch1.len() == ch2.len(),
            "ch2.len",
            ch2.len() as f64,
            "equal channel lengths",
        )?;
        if unit == Unit::Counts {
            for &v in ch1.iter().chain(&ch2) {
                check_domain(
                    v >= 0.0 && v == math::floor(v),
                    "count",
                    v,
                    "nonnegative integer",
                )?;
            }
        } else {
            check_domain(conv.is_some(), "conv", 0.0, "volts series need alpha1, alpha2")?;
        }
        check_domain(
            noise_var.0 >= 0.0 && noise_var.1 >= 0.0,
            "noise_var",
            noise_var.0.min(noise_var.1),
            ">= 0",
        )?;
        Ok(Self {
            unit,
            ch1,
            ch2,
            conv,
            noise_var,
            truncations: 0,
        })
    }

    /// Counts series without instrument noise.
    pub fn from_counts(ch1: Vec<f64>, ch2: Vec<f64>) -> Result<Self> {
        Self::new(Unit::Counts, ch1, ch2, None, (0.0, 0.0))
    }

    /// Assemble a series from shots produced for `cfg`, in shot order.
    pub fn from_shots(cfg: &SimulationConfig, shots: &[Shot]) -> Self {
        let (unit, conv, noise_var) = match cfg.output {
            OutputMode::Counts => (Unit::Counts, None, (0.0, 0.0)),
            OutputMode::Volts {
                alpha1,
                alpha2,
                noise_var1,
                noise_var2,
            } => (Unit::Volts, Some((alpha1, alpha2)), (noise_var1, noise_var2)),
        };
        Self {
            unit,
            ch1: shots.iter().map(|s| s.v1).collect(),
            ch2: shots.iter().map(|s| s.v2).collect(),
            conv,
            noise_var,
            truncations: shots.iter().filter(|s| s.truncated).count() as u64,
        }
    }

    pub fn len(&self) -> usize {
        self.ch1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ch1.is_empty()
    }

    /// Channel values expressed in detected photons (`v / alpha` in volts mode).
    pub fn channel_counts(&self, channel: u8) -> Vec<f64> {
        let (src, alpha) = match (channel, self.conv) {
            (1, Some((a, _))) if self.unit == Unit::Volts => (&self.ch1, a),
            (2, Some((_, a))) if self.unit == Unit::Volts => (&self.ch2, a),
            (1, _) => (&self.ch1, 1.0),
            _ => (&self.ch2, 1.0),
        };
        src.iter().map(|v| v / alpha).collect()
    }
}

/// Variance added to one beam's photon number by pump excess noise `x`, for
/// a beam of total mean `n` over `mu` modes.
///
/// Twin-beam: `(n²/μ) x² asinh²√(n/μ)` (error propagation through the
/// `sinh²` gain law). Thermal: `2 x² n² / μ`. Coherent: `x² n² / μ` (linear).
pub fn pump_excess_variance(kind: SourceKind, n: f64, mu: f64, x: f64) -> f64 {
    let x2 = x * x;
    match kind {
        SourceKind::TwinBeam => {
            let g = math::asinh(math::sqrt(n / mu));
            n * n / mu * x2 * g * g
        }
        SourceKind::SplitThermal => 2.0 * x2 * n * n / mu,
        SourceKind::CoherentPair => x2 * n * n / mu,
    }
}

/// Predicted photon-number variance of one beam including pump excess noise,
/// in the high-intensity (multithermal) approximation.
pub fn predicted_total_variance(src: &SourceSpec, pump_x: f64) -> Result<f64> {
    src.validate()?;
    check_domain(pump_x >= 0.0, "pump_x", pump_x, "pump_x >= 0")?;
    let (n, mu) = (src.n_mean, src.mu as f64);
    let excess = pump_excess_variance(src.kind, n, mu, pump_x);
    Ok(match src.kind {
        SourceKind::CoherentPair => n + excess,
        _ => n * n / mu + excess,
    })
}

/// Geometric (thermal) draw of mean `mean` by inversion of one uniform.
fn sample_thermal<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let u = 1.0 - rng.random::<f64>(); // (0, 1]
    let ln_ratio = math::ln(mean) - math::ln_1p(mean);
    math::floor(math::ln(u) / ln_ratio) as u64
}

fn sample_binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("valid poisson").sample(rng) as u64
}

fn shot_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Simulate shot `index` of `cfg`. Assumes a validated configuration.
pub fn sample_shot(cfg: &SimulationConfig, index: usize) -> Shot {
    let mut rng = shot_rng(cfg.seed, index);
    let src = &cfg.source;
    let mu = src.mu;
    let base = src.per_mode_mean();
    let mut truncated = false;

    let mode_mean = if cfg.pump_x > 0.0 && cfg.pump_model == PumpModel::CommonMode {
        let z: f64 = rng.sample(StandardNormal);
        let mut scale = 1.0 + cfg.pump_x * z;
        if scale < 0.0 {
            scale = 0.0;
            truncated = true;
        }
        match src.kind {
            SourceKind::TwinBeam => {
                let gain = math::asinh(math::sqrt(base));
                let s = math::sinh(gain * math::sqrt(scale));
                s * s
            }
            _ => base * scale,
        }
    } else {
        base
    };

    let (n1, n2) = match src.kind {
        SourceKind::TwinBeam => {
            let k: u64 = (0..mu).map(|_| sample_thermal(&mut rng, mode_mean)).sum();
            (k, k)
        }
        SourceKind::SplitThermal => {
            let t: u64 = (0..mu)
                .map(|_| sample_thermal(&mut rng, 2.0 * mode_mean))
                .sum();
            // a sum of binomial splits is a binomial split of the sum
            let a = sample_binomial(&mut rng, t, src.tau);
            (a, t - a)
        }
        SourceKind::CoherentPair => {
            // independent Poisson modes add up to a Poisson total
            let total = mu as f64 * mode_mean;
            (
                sample_poisson(&mut rng, total),
                sample_poisson(&mut rng, total),
            )
        }
    };
    let mut m1 = sample_binomial(&mut rng, n1, cfg.eff.eta1) as f64;
    let mut m2 = sample_binomial(&mut rng, n2, cfg.eff.eta2) as f64;

    if cfg.pump_x > 0.0 && cfg.pump_model == PumpModel::Budget {
        let (b1, b2) = cfg.beam_means();
        let mu = mu as f64;
        for (m, beam) in [(&mut m1, b1), (&mut m2, b2)] {
            let sd = math::sqrt(pump_excess_variance(src.kind, beam, mu, cfg.pump_x));
            let z: f64 = rng.sample(StandardNormal);
            let v = math::round(*m + sd * z);
            if v < 0.0 {
                truncated = true;
            }
            *m = v.max(0.0);
        }
    }

    let (v1, v2) = match cfg.output {
        OutputMode::Counts => (m1, m2),
        OutputMode::Volts {
            alpha1,
            alpha2,
            noise_var1,
            noise_var2,
        } => {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            (
                alpha1 * m1 + math::sqrt(noise_var1) * z1,
                alpha2 * m2 + math::sqrt(noise_var2) * z2,
            )
        }
    };
    Shot { v1, v2, truncated }
}

/// Simulate a contiguous range of shots.
pub fn sample_range(cfg: &SimulationConfig, range: Range<usize>) -> Vec<Shot> {
    range.map(|i| sample_shot(cfg, i)).collect()
}

/// Simulate the full series of `cfg.shots` shots.
pub fn sample_series(cfg: &SimulationConfig) -> Result<ShotSeries> {
    cfg.validate()?;
    let shots = sample_range(cfg, 0..cfg.shots);
    Ok(ShotSeries::from_shots(cfg, &shots))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eff(a: f64, b: f64) -> EfficiencyPair {
        EfficiencyPair::new(a, b).unwrap()
    }

    #[test]
    fn perfect_twb_detection_pairs_counts() {
        let cfg = SimulationConfig::new(
            SourceSpec::twin_beam(5.0).unwrap().with_modes(3).unwrap(),
            eff(1.0, 1.0),
            2000,
            7,
        );
        let s = sample_series(&cfg).unwrap();
        assert!(s.ch1.iter().zip(&s.ch2).all(|(a, b)| a == b));
        assert!(s.ch1.iter().any(|&v| v > 0.0));
    }

    #[test]
    fn shots_are_reproducible_and_shardable() {
        let cfg = SimulationConfig::new(SourceSpec::split_thermal(4.0).unwrap(), eff(0.6, 0.7), 500, 99)
            .with_pump(0.05, PumpModel::CommonMode);
        let a = sample_series(&cfg).unwrap();
        let b = sample_series(&cfg).unwrap();
        assert_eq!(a, b);
        let mut shards = sample_range(&cfg, 250..500);
        let mut head = sample_range(&cfg, 0..250);
        head.append(&mut shards);
        assert_eq!(ShotSeries::from_shots(&cfg, &head), a);
        let other = SimulationConfig { seed: 100, ..cfg };
        assert_ne!(sample_series(&other).unwrap(), a);
    }

    #[test]
    fn thermal_sampler_mean_and_variance() {
        let mut rng = shot_rng(3, 0);
        let k = 200_000;
        let mean = 2.5;
        let xs: Vec<f64> = (0..k).map(|_| sample_thermal(&mut rng, mean) as f64).collect();
        let m = xs.iter().sum::<f64>() / k as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / k as f64;
        let var = mean * (1.0 + mean);
        assert!((m - mean).abs() < 4.0 * (var / k as f64).sqrt());
        assert!((v - var).abs() < 0.05 * var);
    }

    #[test]
    fn volts_output_applies_conversion() {
        let cfg = SimulationConfig::new(SourceSpec::coherent_pair(3.0).unwrap(), eff(1.0, 1.0), 50, 1)
            .with_output(OutputMode::Volts {
                alpha1: 2.0,
                alpha2: 0.5,
                noise_var1: 0.0,
                noise_var2: 0.0,
            });
        let s = sample_series(&cfg).unwrap();
        assert_eq!(s.unit, Unit::Volts);
        for (v1, v2) in s.ch1.iter().zip(&s.ch2) {
            assert_eq!((v1 / 2.0).fract(), 0.0);
            assert_eq!((v2 / 0.5).fract(), 0.0);
        }
    }

    #[test]
    fn predicted_variance_limits() {
        let src = SourceSpec::twin_beam(1e4).unwrap().with_modes(14).unwrap();
        assert_eq!(predicted_total_variance(&src, 0.0).unwrap(), 1e8 / 14.0);
        // high-intensity regime: correction factor stays within a few percent
        let src = SourceSpec::twin_beam(1.078e7).unwrap().with_modes(14).unwrap();
        let ratio = predicted_total_variance(&src, 0.0224).unwrap() / (src.n_mean * src.n_mean / 14.0);
        assert!(ratio > 1.0 && ratio <= 1.03, "{ratio}");
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimulationConfig::new(SourceSpec::twin_beam(1.0).unwrap(), eff(0.5, 0.5), 0, 1);
        assert!(cfg.validate().is_err());
        cfg.shots = 10;
        cfg.pump_x = -0.1;
        assert!(cfg.validate().is_err());
        cfg.pump_x = 0.0;
        cfg.output = OutputMode::Volts {
            alpha1: 0.0,
            alpha2: 1.0,
            noise_var1: 0.0,
            noise_var2: 0.0,
        };
        assert!(cfg.validate().is_err());
    }
}
