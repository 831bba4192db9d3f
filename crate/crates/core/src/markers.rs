//! Discrimination markers: correlation coefficient, difference-photocurrent
//! distribution and variance, and the threshold photon number below which a
//! twin-beam beats the coherent (shot-noise) benchmark.

use alloc::vec;
use alloc::vec::Vec;

use crate::bessel;
use crate::detector::{analytic_moments, detected_moments, thin_joint, EfficiencyPair};
use crate::error::{check_domain, Error, Result};
use crate::math;
use crate::statekit::{
    MAX_CUTOFF,
    split_thermal_joint, JointCountDistribution, SourceKind, SourceSpec, Truncation,
};
use crate::DEFAULT_TAIL_TOL;

/// Probability mass over the signed difference `d = m1 - m2` on a contiguous
/// support `[d_min, d_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceDistribution {
    d_min: i64,
    probs: Vec<f64>,
    tail_mass: f64,
}

impl DifferenceDistribution {
    pub fn new(d_min: i64, probs: Vec<f64>) -> Result<Self> {
        check_domain(!probs.is_empty(), "probs.len", 0.0, "non-empty support")?;
        for &p in &probs {
            check_domain(p >= 0.0 && p.is_finite(), "prob", p, "finite and >= 0")?;
        }
        Ok(Self::from_parts(d_min, probs))
    }

    fn from_parts(d_min: i64, probs: Vec<f64>) -> Self {
        let total = math::kahan_sum(probs.iter().copied());
        Self {
            d_min,
            probs,
            tail_mass: (1.0 - total).max(0.0),
        }
    }

    pub fn delta(d: i64) -> Self {
        Self {
            d_min: d,
            probs: vec![1.0],
            tail_mass: 0.0,
        }
    }

    pub fn support(&self) -> (i64, i64) {
        (self.d_min, self.d_min + self.probs.len() as i64 - 1)
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, d: i64) -> f64 {
        let (lo, hi) = self.support();
        if d < lo || d > hi {
            0.0
        } else {
            self.probs[(d - lo) as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (self.d_min + i as i64, p))
    }

    pub fn total(&self) -> f64 {
        math::kahan_sum(self.probs.iter().copied())
    }

    /// Mean of the retained mass (normalized).
    pub fn mean(&self) -> f64 {
        math::kahan_sum(self.iter().map(|(d, p)| d as f64 * p)) / self.total()
    }

    /// Variance of the retained mass (normalized).
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        math::kahan_sum(self.iter().map(|(d, p)| (d as f64 - m) * (d as f64 - m) * p))
            / self.total()
    }

    /// `max_d |p(d) - p(-d)|`.
    pub fn asymmetry(&self) -> f64 {
        let (lo, hi) = self.support();
        let w = lo.abs().max(hi.abs());
        (0..=w)
            .map(|d| (self.get(d) - self.get(-d)).abs())
            .fold(0.0, f64::max)
    }

    /// Total variation distance `½ Σ_d |p(d) - q(d)|` over the union of supports.
    pub fn total_variation(&self, other: &Self) -> f64 {
        let (a, b) = (self.support(), other.support());
        let (lo, hi) = (a.0.min(b.0), a.1.max(b.1));
        0.5 * math::kahan_sum((lo..=hi).map(|d| (self.get(d) - other.get(d)).abs()))
    }

    /// Restrict to `[lo, hi]`; mass outside becomes tail.
    pub fn restricted(&self, lo: i64, hi: i64) -> Self {
        let probs = (lo..=hi).map(|d| self.get(d)).collect();
        let mut out = Self::from_parts(lo, probs);
        out.tail_mass = out.tail_mass.max(self.tail_mass);
        out
    }
}

/// Difference-variance summary against the shot-noise level `(η1+η2)N`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VarianceReport {
    pub sigma2_d: f64,
    pub shot_noise_level: f64,
    pub below_shot_noise: bool,
}

/// Threshold photon number `N_th = 2η1η2/(η1-η2)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Threshold {
    Finite(f64),
    /// Equal efficiencies: the twin-beam stays below shot noise for every `N`.
    Unbounded,
}

impl Threshold {
    pub fn value(self) -> Option<f64> {
        match self {
            Threshold::Finite(v) => Some(v),
            Threshold::Unbounded => None,
        }
    }
}

/// Closed-form correlation coefficient. The multimode value uses the
/// per-mode mean `N/mu`, since covariance and variances all scale with `mu`.
pub fn epsilon_analytic(src: &SourceSpec, eff: EfficiencyPair) -> Result<f64> {
    src.validate()?;
    eff.validate()?;
    let n = src.per_mode_mean();
    let (e1, e2) = (eff.eta1, eff.eta2);
    Ok(match src.kind {
        SourceKind::CoherentPair => 0.0,
        SourceKind::TwinBeam => {
            (1.0 + n) * math::sqrt(e1 * e2) / math::sqrt((1.0 + e1 * n) * (1.0 + e2 * n))
        }
        SourceKind::SplitThermal => {
            let t = 2.0 * n;
            let tau = src.tau;
            let (a, b) = (e1 * tau * t, e2 * (1.0 - tau) * t);
            math::sqrt(e1 * e2 * tau * (1.0 - tau)) * t / math::sqrt((1.0 + a) * (1.0 + b))
        }
    })
}

/// Correlation coefficient of a detected-count joint law.
pub fn epsilon_from_joint(dist: &JointCountDistribution) -> Result<f64> {
    detected_moments(dist).epsilon()
}

/// Law of `d = m1 - m2` from a joint count law.
pub fn diff_from_joint(dist: &JointCountDistribution) -> DifferenceDistribution {
    let c = dist.cutoff() as i64;
    let mut acc = vec![math::KahanSum::new(); 2 * c as usize + 1];
    for (a, b, p) in dist.iter() {
        acc[(a as i64 - b as i64 + c) as usize].add(p);
    }
    let probs = acc.iter().map(|s| s.value()).collect();
    let mut out = DifferenceDistribution::from_parts(-c, probs);
    out.tail_mass = dist.tail_mass();
    out
}

/// Closed-form difference variance for a source with per-beam total mean
/// `n_total` spread over `mu` mode pairs (balanced splitter for thermal light).
pub fn sigma2_closed_form(kind: SourceKind, eff: EfficiencyPair, n_total: f64, mu: f64) -> f64 {
    let (e1, e2) = (eff.eta1, eff.eta2);
    let de = e1 - e2;
    let quad = de * de * n_total * n_total / mu;
    match kind {
        SourceKind::CoherentPair => (e1 + e2) * n_total,
        SourceKind::SplitThermal => quad + (e1 + e2) * n_total,
        // written so that η1 = η2 = η gives exactly 2η(1-η)N
        SourceKind::TwinBeam => quad + (e1 * (1.0 - e2) + e2 * (1.0 - e1)) * n_total,
    }
}

pub fn diff_variance_analytic(src: &SourceSpec, eff: EfficiencyPair) -> Result<VarianceReport> {
    src.validate()?;
    eff.validate()?;
    let sigma2_d = if src.kind == SourceKind::SplitThermal && src.tau != 0.5 {
        analytic_moments(src, eff)?.diff_variance()
    } else {
        sigma2_closed_form(src.kind, eff, src.n_mean, src.mu as f64)
    };
    let shot_noise_level = (eff.eta1 + eff.eta2) * src.n_mean;
    Ok(VarianceReport {
        sigma2_d,
        shot_noise_level,
        below_shot_noise: sigma2_d < shot_noise_level,
    })
}

pub fn threshold_n(eff: EfficiencyPair) -> Result<Threshold> {
    eff.validate()?;
    if eff.eta1 == eff.eta2 {
        return Ok(Threshold::Unbounded);
    }
    let de = eff.eta1 - eff.eta2;
    Ok(Threshold::Finite(2.0 * eff.eta1 * eff.eta2 / (de * de)))
}

/// Skellam law of the difference of Poisson counts with means `λ1`, `λ2`:
/// `e^-(λ1+λ2) (λ1/λ2)^(d/2) I_|d|(2√(λ1λ2))`.
pub fn skellam_pmf(d: i64, lambda1: f64, lambda2: f64) -> f64 {
    if lambda1 == 0.0 || lambda2 == 0.0 {
        // one channel is empty: the other is a plain Poisson count
        let (k, lam) = if lambda2 == 0.0 { (d, lambda1) } else { (-d, lambda2) };
        if k < 0 {
            return 0.0;
        }
        return crate::statekit::poisson_pmf(k as u64, lam);
    }
    let z = 2.0 * math::sqrt(lambda1 * lambda2);
    let ln_p = -(lambda1 + lambda2)
        + 0.5 * d as f64 * (math::ln(lambda1) - math::ln(lambda2))
        + bessel::ln_bessel_i(d.unsigned_abs() as u32, z);
    math::exp(ln_p)
}

/// Twin-beam difference law for a single mode pair (double series).
///
/// For `d ≥ 0`, with `w = N/(1+N)`:
/// `p(d) = (1/(1+N)) Σ_n Σ_{q≥n+d} (η1η2 w)^n C(q,n) C(q,n+d)
///        [(1-η1)(1-η2) w]^(q-n) (η1/(1-η1))^d`,
/// and symmetrically with `η1 ↔ η2` for `d < 0`. The summand is evaluated in
/// the equivalent form `P(q) B(q, n+d; η1) B(q, n; η2)` so `η = 1` is exact.
pub fn twb_diff_pmf(d: i64, n_mean: f64, eff: EfficiencyPair) -> f64 {
    if n_mean == 0.0 {
        return if d == 0 { 1.0 } else { 0.0 };
    }
    let (e_hi, e_lo) = if d >= 0 {
        (eff.eta1, eff.eta2)
    } else {
        (eff.eta2, eff.eta1)
    };
    let k = d.unsigned_abs();
    let ln_norm = -math::ln_1p(n_mean);
    let ln_w = math::ln(n_mean) + ln_norm;
    let ln_term = |n: u64, q: u64| -> f64 {
        ln_norm
            + q as f64 * ln_w
            + math::ln_choose(q, n + k)
            + math::ln_pow(e_hi, n + k)
            + math::ln_pow(1.0 - e_hi, q - n - k)
            + math::ln_choose(q, n)
            + math::ln_pow(e_lo, n)
            + math::ln_pow(1.0 - e_lo, q - n)
    };

    let mut total = math::KahanSum::new();
    let mut prev_inner = f64::INFINITY;
    let mut n = 0u64;
    loop {
        let mut inner = math::KahanSum::new();
        let mut prev = 0.0;
        let mut q = n + k;
        loop {
            let t = math::exp(ln_term(n, q));
            inner.add(t);
            if t == 0.0 || (t < prev && t <= 1e-18 * inner.value()) {
                break;
            }
            prev = t;
            q += 1;
        }
        let s = inner.value();
        total.add(s);
        if s == 0.0 || (s < prev_inner && s <= 1e-18 * total.value()) {
            break;
        }
        prev_inner = s;
        n += 1;
    }
    total.value()
}

/// Split-thermal difference law for a single mode pair (balanced splitter),
/// as the triple series over the photon numbers `q, q'` of the two beams and
/// the common detected count `n`: for `d ≥ 0`
/// `p(d) = (1/(1+2N)) Σ_n (η1η2/((1-η1)(1-η2)))^n Σ_{q≥n+d, q'≥n}
///        (N/(1+2N))^(q+q') C(q+q',q) (1-η1)^q (1-η2)^q' C(q,n+d) C(q',n)
///        (η1/(1-η1))^d`,
/// mirrored for `d < 0`. Photon numbers are summed up to the cutoff at which
/// a beam's thermal tail drops below `tol`.
pub fn split_thermal_diff_series(
    d: i64,
    n_mean: f64,
    eff: EfficiencyPair,
    tol: f64,
) -> Result<f64> {
    check_domain(n_mean >= 0.0, "n_mean", n_mean, "n_mean >= 0")?;
    if n_mean == 0.0 {
        return Ok(if d == 0 { 1.0 } else { 0.0 });
    }
    let q_max = {
        let ratio = math::ln(n_mean) - math::ln_1p(n_mean);
        math::ceil(math::ln(tol) / ratio) as u64 + 1
    };
    // (q, e_hi) is the beam that carries the surplus |d|
    let (e_hi, e_lo) = if d >= 0 {
        (eff.eta1, eff.eta2)
    } else {
        (eff.eta2, eff.eta1)
    };
    let k = d.unsigned_abs();
    let ln_fact: Vec<f64> = (0..=2 * q_max + 1).map(math::ln_factorial).collect();
    let ln_c = |a: u64, b: u64| ln_fact[a as usize] - ln_fact[b as usize] - ln_fact[(a - b) as usize];
    let ln_norm = -math::ln_1p(2.0 * n_mean);
    let ln_w = math::ln(n_mean) + ln_norm;

    let mut total = math::KahanSum::new();
    for n in 0..=q_max {
        for q in (n + k)..=q_max {
            let a = ln_c(q, n + k) + math::ln_pow(e_hi, n + k) + math::ln_pow(1.0 - e_hi, q - n - k);
            if a == f64::NEG_INFINITY {
                continue;
            }
            for qp in n..=q_max {
                let b = ln_c(qp, n) + math::ln_pow(e_lo, n) + math::ln_pow(1.0 - e_lo, qp - n);
                let ln_t = ln_norm + (q + qp) as f64 * ln_w + ln_c(q + qp, q) + a + b;
                total.add(math::exp(ln_t));
            }
        }
    }
    Ok(total.value())
}

/// Choose the smallest symmetric window `[-W, W]` holding all but `tol` of the
/// mass of `pmf`, starting from a 12σ estimate and widening until verified.
fn auto_window(pmf: &dyn Fn(i64) -> f64, mean: f64, var: f64, tol: f64) -> Vec<f64> {
    let mut w = math::ceil(mean.abs() + 12.0 * math::sqrt(var)).max(1.0) as i64;
    let mut probs;
    loop {
        probs = (-w..=w).map(pmf).collect::<Vec<f64>>();
        let tail = 1.0 - math::kahan_sum(probs.iter().copied());
        if tail <= tol || w > 1 << 20 {
            break;
        }
        w *= 2;
    }
    // shrink symmetrically while the dropped mass stays within tolerance
    let total = math::kahan_sum(probs.iter().copied());
    let missing = 1.0 - total;
    let mut keep = w;
    let mut dropped = 0.0;
    while keep > 0 {
        let outer = probs[(w - keep) as usize] + probs[(w + keep) as usize];
        if missing + dropped + outer > tol {
            break;
        }
        dropped += outer;
        keep -= 1;
    }
    probs[(w - keep) as usize..=(w + keep) as usize].to_vec()
}

/// Analytic difference law for a single mode pair.
///
/// Coherent pairs use the Skellam form, twin-beams the double series of
/// [`twb_diff_pmf`]; split thermal light goes through the exact thinned joint
/// law. `d_range` defaults to the smallest symmetric window holding
/// `1 - tol` of the mass.
pub fn diff_analytic(
    src: &SourceSpec,
    eff: EfficiencyPair,
    d_range: Option<(i64, i64)>,
    tol: f64,
) -> Result<DifferenceDistribution> {
    src.validate()?;
    eff.validate()?;
    check_domain(src.mu == 1, "mu", src.mu as f64, "single mode pair (mu = 1)")?;
    check_domain(tol > 0.0, "tol", tol, "tol > 0")?;
    let n = src.n_mean;

    if src.kind == SourceKind::SplitThermal {
        let joint = thin_joint(&split_thermal_joint(n, src.tau, Truncation::Auto(tol))?, eff)?;
        let full = diff_from_joint(&joint);
        return Ok(match d_range {
            Some((lo, hi)) => full.restricted(lo, hi),
            None => {
                let m = detected_moments(&joint);
                let pmf = |d: i64| full.get(d);
                let probs = auto_window(&pmf, m.mean1 - m.mean2, m.diff_variance(), tol);
                let k = (probs.len() / 2) as i64;
                DifferenceDistribution::from_parts(-k, probs)
            }
        });
    }

    if src.kind == SourceKind::TwinBeam {
        // the series runs over photon numbers up to the thermal cutoff
        let ln_w = math::ln(n) - math::ln_1p(n);
        let required = math::ceil(math::ln(tol) / ln_w) as usize;
        if required > MAX_CUTOFF {
            return Err(Error::TailTolerance {
                tail: math::exp((MAX_CUTOFF + 1) as f64 * ln_w),
                tol,
                required_cutoff: required,
            });
        }
    }

    let pmf = |d: i64| match src.kind {
        SourceKind::CoherentPair => skellam_pmf(d, eff.eta1 * n, eff.eta2 * n),
        _ => twb_diff_pmf(d, n, eff),
    };
    let dist = match d_range {
        Some((lo, hi)) => {
            check_domain(lo <= hi, "d_range", (hi - lo) as f64, "lo <= hi")?;
            DifferenceDistribution::from_parts(lo, (lo..=hi).map(pmf).collect())
        }
        None => {
            let var = sigma2_closed_form(src.kind, eff, n, 1.0);
            let probs = auto_window(&pmf, (eff.eta1 - eff.eta2) * n, var, tol);
            let k = (probs.len() / 2) as i64;
            let out = DifferenceDistribution::from_parts(-k, probs);
            if out.tail_mass() > tol {
                return Err(Error::TailTolerance {
                    tail: out.tail_mass(),
                    tol,
                    required_cutoff: 2 * k as usize + 1,
                });
            }
            out
        }
    };
    Ok(dist)
}

/// Default-tolerance form of [`diff_analytic`].
pub fn diff_analytic_default(src: &SourceSpec, eff: EfficiencyPair) -> Result<DifferenceDistribution> {
    diff_analytic(src, eff, None, DEFAULT_TAIL_TOL)
}

/// Law of the total difference over `mu` independent mode pairs: the
/// `mu`-fold convolution of the single-pair law. Each step trims both ends,
/// dropping at most `tol` of mass.
pub fn multimode_diff(
    dist_single: &DifferenceDistribution,
    mu: u32,
    tol: f64,
) -> Result<DifferenceDistribution> {
    check_domain(mu >= 1, "mu", mu as f64, "mu >= 1")?;
    check_domain(tol >= 0.0, "tol", tol, "tol >= 0")?;
    let mut acc = dist_single.clone();
    for _ in 1..mu {
        let (a, b) = (acc.probs(), dist_single.probs());
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        let d_min = acc.d_min + dist_single.d_min;
        // trim both ends within budget
        let (mut lo, mut hi) = (0usize, out.len() - 1);
        let mut dropped = 0.0;
        while lo < hi {
            let cand = if out[lo] <= out[hi] { lo } else { hi };
            if dropped + out[cand] > tol {
                break;
            }
            dropped += out[cand];
            if cand == lo {
                lo += 1;
            } else {
                hi -= 1;
            }
        }
        acc = DifferenceDistribution::from_parts(d_min + lo as i64, out[lo..=hi].to_vec());
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statekit::{coherent_joint, twb_joint};

    fn eff(a: f64, b: f64) -> EfficiencyPair {
        EfficiencyPair::new(a, b).unwrap()
    }

    #[test]
    fn epsilon_reference_values() {
        let e = eff(0.5, 0.5);
        let x = epsilon_analytic(&SourceSpec::twin_beam(1.0).unwrap(), e).unwrap();
        let nu = epsilon_analytic(&SourceSpec::split_thermal(1.0).unwrap(), e).unwrap();
        assert!((x - 2.0 / 3.0).abs() < 1e-15);
        assert!((nu - 1.0 / 3.0).abs() < 1e-15);
        for &n in &[0.0, 1.0, 1e6] {
            let a = epsilon_analytic(&SourceSpec::coherent_pair(n).unwrap(), eff(0.3, 0.9)).unwrap();
            assert_eq!(a, 0.0);
        }
    }

    #[test]
    fn epsilon_gap_closes_at_high_intensity() {
        let eta = 0.7;
        for &n in &[1.0, 10.0, 1e3, 1e6] {
            let e = eff(eta, eta);
            let x = epsilon_analytic(&SourceSpec::twin_beam(n).unwrap(), e).unwrap();
            let nu = epsilon_analytic(&SourceSpec::split_thermal(n).unwrap(), e).unwrap();
            assert!(((x - nu) - eta / (1.0 + eta * n)).abs() < 1e-12);
        }
        let x = epsilon_analytic(&SourceSpec::twin_beam(1e9).unwrap(), eff(eta, eta)).unwrap();
        assert!((1.0 - x) < 1e-8);
    }

    #[test]
    fn epsilon_from_thinned_joints() {
        let e = eff(0.5, 0.5);
        let tr = Truncation::Auto(1e-15);
        let c = thin_joint(&coherent_joint(1.0, tr).unwrap(), e).unwrap();
        assert!(epsilon_from_joint(&c).unwrap().abs() < 1e-10);
        let x = thin_joint(&twb_joint(1.0, tr).unwrap(), e).unwrap();
        assert!((epsilon_from_joint(&x).unwrap() - 2.0 / 3.0).abs() < 1e-8);
        let nu = thin_joint(&split_thermal_joint(1.0, 0.5, tr).unwrap(), e).unwrap();
        assert!((epsilon_from_joint(&nu).unwrap() - 1.0 / 3.0).abs() < 1e-8);
        assert!(matches!(
            epsilon_from_joint(&JointCountDistribution::delta(0, 0)),
            Err(Error::UndefinedMarker(_))
        ));
    }

    #[test]
    fn diff_of_delta() {
        let d = diff_from_joint(&JointCountDistribution::delta(3, 1));
        assert_eq!(d.get(2), 1.0);
        assert_eq!(d.total(), 1.0);
    }

    #[test]
    fn perfect_detection_of_twb_has_no_difference() {
        let j = thin_joint(&twb_joint(2.0, Truncation::default()).unwrap(), eff(1.0, 1.0)).unwrap();
        let d = diff_from_joint(&j);
        assert!((d.get(0) - d.total()).abs() < 1e-15);
        let a = diff_analytic_default(&SourceSpec::twin_beam(2.0).unwrap(), eff(1.0, 1.0)).unwrap();
        assert_eq!(a.support(), (0, 0));
        assert!((a.get(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn skellam_vacuum_term() {
        // e^-2 I_0(2)
        let expected = (-2.0f64).exp() * 2.279_585_302_336_067;
        assert!((expected - 0.308_508_322_553_671).abs() < 1e-14);
        assert!((skellam_pmf(0, 1.0, 1.0) - expected).abs() < 1e-15);
        let j = thin_joint(&coherent_joint(1.0, Truncation::Auto(1e-15)).unwrap(), eff(1.0, 1.0))
            .unwrap();
        assert!((diff_from_joint(&j).get(0) - expected).abs() < 1e-14);
    }

    #[test]
    fn twb_series_is_symmetric_for_equal_efficiencies() {
        for &n in &[0.5, 1.0, 3.0] {
            let a = diff_analytic_default(&SourceSpec::twin_beam(n).unwrap(), eff(0.6, 0.6)).unwrap();
            assert!(a.asymmetry() < 1e-15, "N={n}: {}", a.asymmetry());
        }
    }

    #[test]
    fn twb_series_matches_joint_oracle() {
        let src = SourceSpec::twin_beam(1.0).unwrap();
        let e = eff(0.5, 0.5);
        let a = diff_analytic_default(&src, e).unwrap();
        let oracle = diff_from_joint(&thin_joint(&twb_joint(1.0, Truncation::default()).unwrap(), e).unwrap());
        assert!(a.total_variation(&oracle) <= 1e-8);
    }

    #[test]
    fn thermal_series_matches_joint_oracle() {
        let e = eff(0.3, 0.67);
        let oracle = diff_from_joint(
            &thin_joint(&split_thermal_joint(0.5, 0.5, Truncation::Auto(1e-14)).unwrap(), e).unwrap(),
        );
        for d in -6..=6 {
            let s = split_thermal_diff_series(d, 0.5, e, 1e-14).unwrap();
            assert!((s - oracle.get(d)).abs() < 1e-12, "d={d}");
        }
    }

    #[test]
    fn variance_reference_values() {
        let r = diff_variance_analytic(&SourceSpec::twin_beam(1.0).unwrap(), eff(0.5, 0.7)).unwrap();
        assert!((r.sigma2_d - 0.54).abs() < 1e-15);
        assert!((r.shot_noise_level - 1.2).abs() < 1e-15);
        assert!(r.below_shot_noise);
        let r = diff_variance_analytic(&SourceSpec::twin_beam(3.0).unwrap(), eff(1.0, 1.0)).unwrap();
        assert_eq!(r.sigma2_d, 0.0);
        for &eta in &[0.3, 0.5, 0.67, 0.9] {
            for &n in &[0.5, 1.0, 2.0] {
                let e = eff(eta, eta);
                let x = diff_variance_analytic(&SourceSpec::twin_beam(n).unwrap(), e).unwrap();
                let a = diff_variance_analytic(&SourceSpec::coherent_pair(n).unwrap(), e).unwrap();
                let nu = diff_variance_analytic(&SourceSpec::split_thermal(n).unwrap(), e).unwrap();
                assert_eq!(x.sigma2_d, 2.0 * eta * (1.0 - eta) * n);
                assert_eq!(a.sigma2_d, nu.sigma2_d);
                assert!(x.sigma2_d < a.sigma2_d);
            }
        }
    }

    #[test]
    fn threshold_values() {
        let t = threshold_n(eff(0.5, 0.7)).unwrap().value().unwrap();
        assert!((t - 17.5).abs() < 1e-12);
        assert_eq!(threshold_n(eff(0.6, 0.6)).unwrap(), Threshold::Unbounded);
        let e = eff(0.5, 0.7);
        let nth = threshold_n(e).unwrap().value().unwrap();
        let x = sigma2_closed_form(SourceKind::TwinBeam, e, nth, 1.0);
        let a = sigma2_closed_form(SourceKind::CoherentPair, e, nth, 1.0);
        assert!((x - a).abs() <= 1e-10 * a);
    }

    #[test]
    fn unequal_efficiency_orderings() {
        let e = eff(0.5, 0.7);
        let nth = 17.5;
        for &n in &[0.5, 1.0, 5.0, 17.0, 18.0, 100.0] {
            let x = sigma2_closed_form(SourceKind::TwinBeam, e, n, 1.0);
            let a = sigma2_closed_form(SourceKind::CoherentPair, e, n, 1.0);
            let nu = sigma2_closed_form(SourceKind::SplitThermal, e, n, 1.0);
            assert!(x < nu && a < nu);
            assert_eq!(x < a, n < nth);
        }
    }

    #[test]
    fn asymmetric_for_unequal_efficiencies() {
        for src in [SourceSpec::twin_beam(1.0).unwrap(), SourceSpec::coherent_pair(1.0).unwrap()] {
            let a = diff_analytic_default(&src, eff(0.3, 0.9)).unwrap();
            assert!(a.asymmetry() > 1e-3);
        }
    }

    #[test]
    fn multimode_diff_identity_and_variance() {
        let single = diff_analytic_default(&SourceSpec::twin_beam(1.0).unwrap(), eff(0.5, 0.8)).unwrap();
        assert_eq!(multimode_diff(&single, 1, 0.0).unwrap(), single);
        for mu in [2u32, 3, 5] {
            let m = multimode_diff(&single, mu, 1e-16).unwrap();
            let rel = (m.variance() - mu as f64 * single.variance()).abs() / (mu as f64 * single.variance());
            assert!(rel < 1e-8, "mu={mu}: {rel}");
        }
    }

    #[test]
    fn vacuum_gives_delta_at_zero() {
        for kind in SourceKind::ALL {
            let a = diff_analytic_default(&SourceSpec::new(kind, 0.0).unwrap(), eff(0.5, 0.7)).unwrap();
            assert_eq!(a.support(), (0, 0), "{kind:?}");
            assert!((a.get(0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn multimode_source_is_rejected_by_single_pair_law() {
        let src = SourceSpec::twin_beam(1.0).unwrap().with_modes(2).unwrap();
        assert!(diff_analytic_default(&src, eff(0.5, 0.5)).is_err());
    }
}
