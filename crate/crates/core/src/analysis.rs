//! Estimators and inverse problems on shot series.
//!
//! Covers the shot-to-shot correlation function, noise-subtracted correlation
//! coefficient and difference variance, multithermal (Gamma) fitting, and the
//! noise-budget inversions for efficiency imbalance and pump excess noise.
//!
//! In the budget formulas the photon number of channel `j` is estimated as
//! `N_j = M_j / η_j` from its mean detected count `M_j`; where a single `N` is
//! needed the two estimates are averaged.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::detector::EfficiencyPair;
use crate::error::{check_domain, Error, Result};
use crate::markers::sigma2_closed_form;
use crate::math;
use crate::simshots::{pump_excess_variance, ShotSeries, Unit};
use crate::statekit::SourceKind;

/// Minimum number of samples accepted by [`fit_multithermal`].
pub const MIN_FIT_SAMPLES: usize = 1000;
/// Upper end of the mode-number search in [`fit_multithermal`].
pub const MAX_FIT_MU: u32 = 200;

fn mean(xs: &[f64]) -> f64 {
    math::kahan_sum(xs.iter().copied()) / xs.len() as f64
}

/// Population variance (divides by `K`).
fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    math::kahan_sum(xs.iter().map(|x| (x - m) * (x - m))) / xs.len() as f64
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    math::kahan_sum(a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb))) / a.len() as f64
}

/// Normalized cross-correlation between channel 1 at shot `k` and channel 2
/// at shot `k + lag`. Only shots with a valid partner enter the sum, which is
/// divided by their number; means and standard deviations use the full series.
pub fn gamma(series: &ShotSeries, lag: i64) -> Result<f64> {
    let k = series.len();
    let need = lag.unsigned_abs() as usize + 2;
    if k < need {
        return Err(Error::InsufficientData {
            needed: need,
            got: k,
        });
    }
    let (v1, v2) = (&series.ch1, &series.ch2);
    let (m1, m2) = (mean(v1), mean(v2));
    let (s1, s2) = (variance(v1), variance(v2));
    if !(s1 > 0.0 && s2 > 0.0) {
        return Err(Error::UndefinedMarker("correlation of a constant channel"));
    }
    let start = if lag < 0 { lag.unsigned_abs() as usize } else { 0 };
    let end = if lag > 0 { k - lag as usize } else { k };
    let sum = math::kahan_sum(
        (start..end).map(|i| (v1[i] - m1) * (v2[(i as i64 + lag) as usize] - m2)),
    );
    Ok(sum / (end - start) as f64 / math::sqrt(s1 * s2))
}

/// Correlation coefficient with the instrument-noise variance subtracted from
/// each channel variance. The covariance is not corrected.
pub fn epsilon_measured(series: &ShotSeries) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: series.len(),
        });
    }
    let (nv1, nv2) = series.noise_var;
    let (s1, s2) = (variance(&series.ch1), variance(&series.ch2));
    for (channel, measured, noise) in [(1u8, s1, nv1), (2, s2, nv2)] {
        if measured - noise <= 0.0 {
            return Err(Error::NoiseDominated {
                channel,
                measured,
                noise,
            });
        }
    }
    Ok(covariance(&series.ch1, &series.ch2) / math::sqrt((s1 - nv1) * (s2 - nv2)))
}

/// Per-shot difference `m1 - m2` in detected photons.
pub fn differences(series: &ShotSeries) -> Vec<f64> {
    let (c1, c2) = (series.channel_counts(1), series.channel_counts(2));
    c1.iter().zip(&c2).map(|(a, b)| a - b).collect()
}

/// Instrument-noise variance propagated into the count difference.
fn difference_noise(series: &ShotSeries) -> f64 {
    let (nv1, nv2) = series.noise_var;
    match (series.unit, series.conv) {
        (Unit::Volts, Some((a1, a2))) => nv1 / (a1 * a1) + nv2 / (a2 * a2),
        _ => nv1 + nv2,
    }
}

/// Variance of the count difference with instrument noise subtracted.
pub fn measured_diff_variance(series: &ShotSeries) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: series.len(),
        });
    }
    if series.unit == Unit::Volts && series.conv.is_none() {
        return Err(Error::Domain {
            param: "conv",
            value: 0.0,
            bound: "volts series need conversion coefficients",
        });
    }
    let raw = variance(&differences(series));
    let noise = difference_noise(series);
    let corrected = raw - noise;
    if corrected < 0.0 {
        return Err(Error::NoiseDominated {
            channel: 0,
            measured: raw,
            noise,
        });
    }
    Ok(corrected)
}

/// Histogram of the per-shot difference rounded to whole photons, as sorted
/// `(d, count)` pairs.
pub fn diff_histogram(series: &ShotSeries) -> Vec<(i64, u64)> {
    let mut ds: Vec<i64> = differences(series)
        .iter()
        .map(|&d| math::round(d) as i64)
        .collect();
    ds.sort_unstable();
    let mut out: Vec<(i64, u64)> = Vec::new();
    for d in ds {
        match out.last_mut() {
            Some((v, c)) if *v == d => *c += 1,
            _ => out.push((d, 1)),
        }
    }
    out
}

/// Standard error of a two-channel statistic by the method of batch means:
/// the series is cut into `batches` contiguous blocks, the statistic is
/// evaluated on each, and the spread of the block values is scaled by
/// `1/√batches`.
pub fn batch_standard_error<F>(series: &ShotSeries, batches: usize, stat: F) -> Result<f64>
where
    F: Fn(&ShotSeries) -> Result<f64>,
{
    check_domain(batches >= 2, "batches", batches as f64, "batches >= 2")?;
    let size = series.len() / batches;
    check_domain(size >= 2, "batch size", size as f64, "at least 2 shots per batch")?;
    let mut values = Vec::with_capacity(batches);
    for b in 0..batches {
        let r = b * size..(b + 1) * size;
        let sub = ShotSeries {
            ch1: series.ch1[r.clone()].to_vec(),
            ch2: series.ch2[r].to_vec(),
            ..series.clone()
        };
        values.push(stat(&sub)?);
    }
    let m = mean(&values);
    let var = math::kahan_sum(values.iter().map(|v| (v - m) * (v - m))) / (batches - 1) as f64;
    Ok(math::sqrt(var / batches as f64))
}

/// Result of fitting the multithermal law to one channel.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MultithermalFit {
    pub mu_hat: f64,
    pub v_t_hat: f64,
    /// Negative log-likelihood per sample at the fitted parameters.
    pub neg_log_likelihood: f64,
    /// Pearson chi-square per bin on a Freedman–Diaconis histogram.
    pub chi2_per_bin: f64,
    pub bins: usize,
    /// Number of non-positive samples clipped before fitting.
    pub clipped: usize,
}

/// Profile log-likelihood per sample of the Gamma family at shape `mu`, with
/// the mean fixed at its maximum-likelihood value `v_bar`.
fn profile_loglik(mu: f64, v_bar: f64, mean_ln: f64) -> f64 {
    -mu + (mu - 1.0) * mean_ln - math::ln_gamma(mu) - mu * math::ln(v_bar / mu)
}

/// Maximum-likelihood multithermal fit.
///
/// `V_T` is the sample mean; `mu` maximizes the profile likelihood, over the
/// integers `1..=200` when `integer_mu`, otherwise continuously on `[1, 200]`.
/// Non-positive samples are clipped; in the likelihood they are replaced by
/// half the smallest positive sample so that `ln v` stays finite.
pub fn fit_multithermal(samples: &[f64], integer_mu: bool) -> Result<MultithermalFit> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_SAMPLES,
            got: samples.len(),
        });
    }
    let min_pos = samples
        .iter()
        .copied()
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min_pos.is_finite() {
        return Err(Error::InconsistentData(format!(
            "no positive samples among {}",
            samples.len()
        )));
    }
    let clipped = samples.iter().filter(|&&v| v <= 0.0).count();
    let values: Vec<f64> = samples.iter().map(|&v| v.max(0.0)).collect();
    let floor = 0.5 * min_pos;
    let v_bar = mean(&values);
    let mean_ln = math::kahan_sum(values.iter().map(|&v| math::ln(v.max(floor)))) / values.len() as f64;

    let mu_hat = if integer_mu {
        let mut best = (1u32, f64::NEG_INFINITY);
        for mu in 1..=MAX_FIT_MU {
            let l = profile_loglik(mu as f64, v_bar, mean_ln);
            if l > best.1 {
                best = (mu, l);
            }
        }
        best.0 as f64
    } else {
        // stationarity: ln μ - ψ(μ) = ln v̄ - <ln v>, left side decreasing in μ
        let target = math::ln(v_bar) - mean_ln;
        let h = |mu: f64| math::ln(mu) - math::digamma(mu) - target;
        let (mut lo, mut hi) = (1.0, MAX_FIT_MU as f64);
        if h(lo) <= 0.0 {
            1.0
        } else if h(hi) >= 0.0 {
            hi
        } else {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if h(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    };
    let neg_log_likelihood = -profile_loglik(mu_hat, v_bar, mean_ln);
    let (chi2_per_bin, bins) = histogram_chi2(&values, mu_hat, v_bar);
    Ok(MultithermalFit {
        mu_hat,
        v_t_hat: v_bar,
        neg_log_likelihood,
        chi2_per_bin,
        bins,
        clipped,
    })
}

/// Pearson chi-square per bin of `values` against the fitted density on a
/// Freedman–Diaconis histogram. Bins with expected count below 5 are merged
/// into their neighbours.
fn histogram_chi2(values: &[f64], mu: f64, v_t: f64) -> (f64, usize) {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let k = sorted.len();
    let q = |p: f64| sorted[((k - 1) as f64 * p) as usize];
    let iqr = q(0.75) - q(0.25);
    let (lo, hi) = (sorted[0], sorted[k - 1]);
    let width = 2.0 * iqr / math::powf(k as f64, 1.0 / 3.0);
    if width.is_nan() || width <= 0.0 || hi <= lo {
        return (0.0, 1);
    }
    let nbins = (math::ceil((hi - lo) / width) as usize).clamp(1, 10_000);
    let width = (hi - lo) / nbins as f64;
    let mut observed = vec![0u64; nbins];
    for &v in &sorted {
        let b = (((v - lo) / width) as usize).min(nbins - 1);
        observed[b] += 1;
    }
    let density = |v: f64| {
        crate::statekit::multithermal_pdf(v.max(0.0), mu.max(1.0), v_t).unwrap_or(0.0)
    };
    let bin_prob = |a: f64, b: f64| {
        // composite Simpson, 16 panels
        let n = 16;
        let h = (b - a) / n as f64;
        let mut s = density(a) + density(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * density(a + i as f64 * h);
        }
        s * h / 3.0
    };
    let mut chi2 = 0.0;
    let mut used = 0usize;
    let (mut obs_acc, mut exp_acc) = (0.0, 0.0);
    for (b, &o) in observed.iter().enumerate() {
        let a = lo + b as f64 * width;
        obs_acc += o as f64;
        exp_acc += k as f64 * bin_prob(a, a + width);
        if exp_acc >= 5.0 || b == nbins - 1 {
            if exp_acc > 0.0 {
                chi2 += (obs_acc - exp_acc) * (obs_acc - exp_acc) / exp_acc;
                used += 1;
            }
            obs_acc = 0.0;
            exp_acc = 0.0;
        }
    }
    (chi2 / used.max(1) as f64, used.max(1))
}

/// Measured quantities entering the noise budget.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BudgetData {
    pub kind: SourceKind,
    /// Difference-photocurrent variance with instrument noise subtracted.
    pub sigma2_measured: f64,
    /// Mean detected photons of channel 1.
    pub m1: f64,
    pub m2: f64,
    pub mu: u32,
}

impl BudgetData {
    pub fn validate(&self) -> Result<()> {
        check_domain(
            self.sigma2_measured >= 0.0 && self.sigma2_measured.is_finite(),
            "sigma2_measured",
            self.sigma2_measured,
            "finite and >= 0",
        )?;
        check_domain(self.m1 > 0.0, "m1", self.m1, "m1 > 0")?;
        check_domain(self.m2 > 0.0, "m2", self.m2, "m2 > 0")?;
        check_domain(self.mu >= 1, "mu", self.mu as f64, "mu >= 1")
    }

    fn means(&self) -> [f64; 2] {
        [self.m1, self.m2]
    }

    /// Per-channel photon numbers `M_j/η_j`.
    pub fn photon_numbers(&self, eff: EfficiencyPair) -> (f64, f64) {
        (self.m1 / eff.eta1, self.m2 / eff.eta2)
    }

    /// Theoretical difference variance at efficiencies `eff`, with `N` the
    /// average of the two channel estimates.
    pub fn theory(&self, eff: EfficiencyPair) -> f64 {
        let (n1, n2) = self.photon_numbers(eff);
        sigma2_closed_form(self.kind, eff, 0.5 * (n1 + n2), self.mu as f64)
    }

    /// Coefficient `C` of `x²` in the pump-noise excess of the difference
    /// variance: `Σ_j δ²(M_j/η_j) / x²`.
    pub fn excess_coefficient(&self, eff: EfficiencyPair) -> f64 {
        let (n1, n2) = self.photon_numbers(eff);
        let mu = self.mu as f64;
        pump_excess_variance(self.kind, n1, mu, 1.0) + pump_excess_variance(self.kind, n2, mu, 1.0)
    }

    /// Measured variance corrected for pump noise `x`.
    pub fn corrected(&self, eff: EfficiencyPair, x: f64) -> f64 {
        self.sigma2_measured - x * x * self.excess_coefficient(eff)
    }

    /// Shot-noise level `M1 + M2`, i.e. `(η1+η2)N` at balanced efficiencies.
    pub fn shot_noise_plane(&self) -> f64 {
        self.m1 + self.m2
    }
}

/// One admissible efficiency pair reproducing the measured variance.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImbalanceSolution {
    pub eta1: f64,
    pub eta2: f64,
    /// Photon number used in the model, `M_j/η_j` of the reference channel.
    pub n: f64,
    pub delta: f64,
    /// Model variance at this solution.
    pub sigma2_model: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImbalanceInterval {
    pub lo: f64,
    pub hi: f64,
    pub solutions: Vec<ImbalanceSolution>,
}

/// Smallest root of `g` on `[0, hi]` given `g(0) < 0`, by a uniform scan for
/// the first sign change followed by bisection.
fn first_root(g: impl Fn(f64) -> f64, hi: f64) -> Option<f64> {
    const SCAN: usize = 4096;
    let mut prev = 0.0;
    for i in 1..=SCAN {
        let x = hi * i as f64 / SCAN as f64;
        if g(x) >= 0.0 {
            let (mut a, mut b) = (prev, x);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if g(m) >= 0.0 {
                    b = m;
                } else {
                    a = m;
                }
            }
            return Some(if g(a).abs() < g(b).abs() { a } else { b });
        }
        prev = x;
    }
    None
}

/// Efficiency imbalance `|η1 - η2|` needed to explain the measured difference
/// variance without pump noise.
///
/// The admissible pairs have one channel at `eta_nominal` and the other at
/// `eta_nominal ± Δ` (inside `(0, 1]`), with the model photon number taken as
/// `M_j/η_j` from either channel. Each of the eight combinations is solved for
/// its smallest root `Δ ≥ 0`; the interval spans the roots found.
pub fn imbalance_bounds(data: &BudgetData, eta_nominal: f64) -> Result<ImbalanceInterval> {
    data.validate()?;
    check_domain(
        eta_nominal > 0.0 && eta_nominal <= 1.0,
        "eta_nominal",
        eta_nominal,
        "0 < eta_nominal <= 1",
    )?;
    let means = data.means();
    let mu = data.mu as f64;
    let mut solutions = Vec::new();

    for pinned in 0..2usize {
        for sign in [1.0f64, -1.0] {
            let delta_max = if sign > 0.0 {
                1.0 - eta_nominal
            } else {
                eta_nominal * (1.0 - 1e-12)
            };
            for reference in 0..2usize {
                let etas = |delta: f64| {
                    let mut e = [eta_nominal; 2];
                    e[1 - pinned] = eta_nominal + sign * delta;
                    e
                };
                let model = |delta: f64| {
                    let e = etas(delta);
                    let n = means[reference] / e[reference];
                    let eff = EfficiencyPair {
                        eta1: e[0],
                        eta2: e[1],
                    };
                    (sigma2_closed_form(data.kind, eff, n, mu), n)
                };
                let g = |delta: f64| model(delta).0 - data.sigma2_measured;
                let g0 = g(0.0);
                let root = if g0 == 0.0 {
                    Some(0.0)
                } else if g0 > 0.0 || delta_max <= 0.0 {
                    None
                } else {
                    first_root(g, delta_max)
                };
                if let Some(delta) = root {
                    let e = etas(delta);
                    let (sigma2_model, n) = model(delta);
                    solutions.push(ImbalanceSolution {
                        eta1: e[0],
                        eta2: e[1],
                        n,
                        delta,
                        sigma2_model,
                    });
                }
            }
        }
    }
    if solutions.is_empty() {
        return Err(Error::InconsistentData(format!(
            "no efficiency pair near {eta_nominal} reproduces sigma2 = {:e}",
            data.sigma2_measured
        )));
    }
    let lo = solutions.iter().map(|s| s.delta).fold(f64::INFINITY, f64::min);
    let hi = solutions.iter().map(|s| s.delta).fold(0.0, f64::max);
    Ok(ImbalanceInterval { lo, hi, solutions })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PumpSolution {
    pub x: f64,
    /// The measured variance does not exceed the noiseless theory; `x = 0`.
    pub at_floor: bool,
    /// Theoretical variance without pump noise at these efficiencies.
    pub sigma2_theory: f64,
    /// Measured variance corrected for the pump excess at `x`.
    pub sigma2_corrected: f64,
}

/// Pump excess-noise fraction `x` such that the measured variance, corrected
/// for the pump-noise excess, equals the theoretical variance at `eff`.
///
/// The excess is `x² C`, so the budget is affine in `x²` and solved in closed
/// form: `x = √((σ²_meas - σ²_theory) / C)`.
pub fn solve_pump_x(data: &BudgetData, eff: EfficiencyPair) -> Result<PumpSolution> {
    data.validate()?;
    eff.validate()?;
    check_domain(eff.eta1 > 0.0, "eta1", eff.eta1, "eta1 > 0")?;
    check_domain(eff.eta2 > 0.0, "eta2", eff.eta2, "eta2 > 0")?;
    let theory = data.theory(eff);
    let coeff = data.excess_coefficient(eff);
    if data.sigma2_measured <= theory {
        return Ok(PumpSolution {
            x: 0.0,
            at_floor: true,
            sigma2_theory: theory,
            sigma2_corrected: data.sigma2_measured,
        });
    }
    let x = math::sqrt((data.sigma2_measured - theory) / coeff);
    // σ² - x²C equals the theory value by construction; evaluating the
    // subtraction would cancel most significant digits when the excess dominates
    Ok(PumpSolution {
        x,
        at_floor: false,
        sigma2_theory: theory,
        sigma2_corrected: theory,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoisePoint {
    pub eta1: f64,
    pub eta2: f64,
    pub x: f64,
    pub at_floor: bool,
    pub sigma2_corrected: f64,
    /// `(η1+η2)N` at this grid point.
    pub shot_noise: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseBudget {
    pub points: Vec<NoisePoint>,
    pub shot_noise_plane: f64,
    pub imbalance: Option<ImbalanceInterval>,
}

/// Solve the pump budget on the grid `eta1_values × eta2_values` (row-major in
/// `eta1`). When `eta_nominal` is given the imbalance interval is attached.
pub fn noise_surface(
    data: &BudgetData,
    eta1_values: &[f64],
    eta2_values: &[f64],
    eta_nominal: Option<f64>,
) -> Result<NoiseBudget> {
    data.validate()?;
    let mut points = Vec::with_capacity(eta1_values.len() * eta2_values.len());
    for &eta1 in eta1_values {
        for &eta2 in eta2_values {
            check_domain(eta1 > 0.0 && eta1 <= 1.0, "eta1", eta1, "0 < eta1 <= 1")?;
            check_domain(eta2 > 0.0 && eta2 <= 1.0, "eta2", eta2, "0 < eta2 <= 1")?;
            let eff = EfficiencyPair { eta1, eta2 };
            let sol = solve_pump_x(data, eff)?;
            let (n1, n2) = data.photon_numbers(eff);
            points.push(NoisePoint {
                eta1,
                eta2,
                x: sol.x,
                at_floor: sol.at_floor,
                sigma2_corrected: sol.sigma2_corrected,
                shot_noise: (eta1 + eta2) * 0.5 * (n1 + n2),
            });
        }
    }
    let imbalance = match eta_nominal {
        Some(eta) => Some(imbalance_bounds(data, eta)?),
        None => None,
    };
    Ok(NoiseBudget {
        points,
        shot_noise_plane: data.shot_noise_plane(),
        imbalance,
    })
}

/// Evenly spaced grid of `steps` values over `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..steps)
            .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
            .collect(),
    }
}
