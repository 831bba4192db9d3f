//! Photon-number statistics of the benchmark two-mode sources.
//!
//! Three sources are modelled, all with the same per-beam mean photon number
//! `N`:
//!
//! - the twin-beam `√(1-x²) Σ_k x^k |k⟩|k⟩`, with `x² = N/(1+N)`: photon
//!   numbers are perfectly paired and each marginal is thermal;
//! - a factorized coherent pair `|α⟩|α⟩` with `|α|² = N`: two independent
//!   Poisson laws;
//! - a thermal beam of mean `2N` split on a beam splitter of transmissivity
//!   `τ`: a binomial partition of a thermal photon number. This state is
//!   separable for every `N` even though its photon numbers are correlated.
//!
//! Joint laws are truncated to a square support `[0, cutoff]²` and carry the
//! discarded probability as `tail_mass`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_domain, Error, Result};
use crate::math;
use crate::DEFAULT_TAIL_TOL;

/// Largest supported cutoff of a joint distribution (the matrix is dense).
pub const MAX_CUTOFF: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SourceKind {
    TwinBeam,
    CoherentPair,
    SplitThermal,
}

impl SourceKind {
    pub const ALL: [SourceKind; 3] = [
        SourceKind::CoherentPair,
        SourceKind::TwinBeam,
        SourceKind::SplitThermal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SourceKind::TwinBeam => "twin_beam",
            SourceKind::CoherentPair => "coherent_pair",
            SourceKind::SplitThermal => "split_thermal",
        }
    }
}

/// A two-mode source with `mu` identically populated mode pairs.
///
/// `n_mean` is the per-beam mean photon number summed over all `mu` modes.
/// `tau` is only used by [`SourceKind::SplitThermal`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub n_mean: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_mu"))]
    pub mu: u32,
    #[cfg_attr(feature = "serde", serde(default = "default_tau"))]
    pub tau: f64,
}

#[cfg(feature = "serde")]
fn default_mu() -> u32 {
    1
}

#[cfg(feature = "serde")]
fn default_tau() -> f64 {
    0.5
}

impl SourceSpec {
    pub fn new(kind: SourceKind, n_mean: f64) -> Result<Self> {
        let spec = Self {
            kind,
            n_mean,
            mu: 1,
            tau: 0.5,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn twin_beam(n_mean: f64) -> Result<Self> {
        Self::new(SourceKind::TwinBeam, n_mean)
    }

    pub fn coherent_pair(n_mean: f64) -> Result<Self> {
        Self::new(SourceKind::CoherentPair, n_mean)
    }

    pub fn split_thermal(n_mean: f64) -> Result<Self> {
        Self::new(SourceKind::SplitThermal, n_mean)
    }

    pub fn with_modes(mut self, mu: u32) -> Result<Self> {
        self.mu = mu;
        self.validate()?;
        Ok(self)
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        self.tau = tau;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_domain(
            self.n_mean.is_finite() && self.n_mean >= 0.0,
            "n_mean",
            self.n_mean,
            "0 <= n_mean < inf",
        )?;
        check_domain(self.mu >= 1, "mu", self.mu as f64, "mu >= 1")?;
        check_domain(
            (0.0..=1.0).contains(&self.tau),
            "tau",
            self.tau,
            "0 <= tau <= 1",
        )
    }

    /// Mean photon number of one beam in one mode pair.
    pub fn per_mode_mean(&self) -> f64 {
        self.n_mean / self.mu as f64
    }

    /// Squared twin-beam parameter `x² = N/(1+N)` of a single mode pair.
    pub fn twin_beam_x2(&self) -> f64 {
        let n = self.per_mode_mean();
        n / (1.0 + n)
    }

    /// Photon-number joint law of a single mode pair of this source.
    pub fn single_mode_joint(&self, trunc: Truncation) -> Result<JointCountDistribution> {
        let n = self.per_mode_mean();
        match self.kind {
            SourceKind::TwinBeam => twb_joint(n, trunc),
            SourceKind::CoherentPair => coherent_joint(n, trunc),
            SourceKind::SplitThermal => split_thermal_joint(n, self.tau, trunc),
        }
    }
}

/// How a joint law is truncated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Smallest cutoff whose discarded mass is at most the tolerance.
    Auto(f64),
    /// Exactly this cutoff; any tail mass is accepted and reported.
    Fixed(usize),
    /// This cutoff, failing if the discarded mass exceeds the tolerance.
    Checked { cutoff: usize, tol: f64 },
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Auto(DEFAULT_TAIL_TOL)
    }
}

impl Truncation {
    /// Resolve to a concrete cutoff given an upper bound on the tail mass
    /// as a function of the cutoff.
    fn resolve(self, tail_bound: impl Fn(usize) -> f64) -> Result<usize> {
        match self {
            Truncation::Fixed(c) => check_cutoff(c),
            Truncation::Auto(tol) => required_cutoff(tol, &tail_bound),
            Truncation::Checked { cutoff, tol } => {
                check_cutoff(cutoff)?;
                let tail = tail_bound(cutoff);
                if tail > tol {
                    let required = required_cutoff(tol, &tail_bound).unwrap_or(MAX_CUTOFF + 1);
                    return Err(Error::TailTolerance {
                        tail,
                        tol,
                        required_cutoff: required,
                    });
                }
                Ok(cutoff)
            }
        }
    }
}

fn check_cutoff(c: usize) -> Result<usize> {
    check_domain(c <= MAX_CUTOFF, "cutoff", c as f64, "cutoff <= MAX_CUTOFF")?;
    Ok(c)
}

fn required_cutoff(tol: f64, tail_bound: impl Fn(usize) -> f64) -> Result<usize> {
    check_domain(tol > 0.0, "tol", tol, "tol > 0")?;
    // tail bounds are monotone in the cutoff: bisect on [0, MAX_CUTOFF]
    if tail_bound(MAX_CUTOFF) > tol {
        return Err(Error::TailTolerance {
            tail: tail_bound(MAX_CUTOFF),
            tol,
            required_cutoff: MAX_CUTOFF + 1,
        });
    }
    let (mut lo, mut hi) = (0usize, MAX_CUTOFF);
    if tail_bound(0) <= tol {
        return Ok(0);
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if tail_bound(mid) <= tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Truncated joint law over `(n1, n2) ∈ [0, cutoff]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCountDistribution {
    cutoff: usize,
    probs: Vec<f64>,
    tail_mass: f64,
}

impl JointCountDistribution {
    /// Build from a row-major `(cutoff+1)²` matrix; the tail mass is whatever
    /// the entries leave to 1.
    pub fn from_matrix(cutoff: usize, probs: Vec<f64>) -> Result<Self> {
        let dim = cutoff + 1;
        check_domain(
            probs.len() == dim * dim,
            "probs.len",
            probs.len() as f64,
            "(cutoff+1)^2 entries",
        )?;
        for &p in &probs {
            check_domain(p >= 0.0 && p.is_finite(), "prob", p, "finite and >= 0")?;
        }
        let total = math::kahan_sum(probs.iter().copied());
        check_domain(total <= 1.0 + 1e-12, "total", total, "sum <= 1")?;
        Ok(Self {
            cutoff,
            probs,
            tail_mass: (1.0 - total).max(0.0),
        })
    }

    /// Point mass at `(n1, n2)`.
    pub fn delta(n1: usize, n2: usize) -> Self {
        let cutoff = n1.max(n2);
        let dim = cutoff + 1;
        let mut probs = vec![0.0; dim * dim];
        probs[n1 * dim + n2] = 1.0;
        Self {
            cutoff,
            probs,
            tail_mass: 0.0,
        }
    }

    pub(crate) fn from_parts(cutoff: usize, probs: Vec<f64>) -> Self {
        let total = math::kahan_sum(probs.iter().copied());
        Self {
            cutoff,
            probs,
            tail_mass: (1.0 - total).max(0.0),
        }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.cutoff + 1
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// `p(n1, n2)`; zero outside the support.
    pub fn get(&self, n1: usize, n2: usize) -> f64 {
        if n1 > self.cutoff || n2 > self.cutoff {
            0.0
        } else {
            self.probs[n1 * self.dim() + n2]
        }
    }

    /// Row-major probability matrix.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        math::kahan_sum(self.probs.iter().copied())
    }

    pub fn marginal1(&self) -> Vec<f64> {
        let dim = self.dim();
        (0..dim)
            .map(|i| math::kahan_sum(self.probs[i * dim..(i + 1) * dim].iter().copied()))
            .collect()
    }

    pub fn marginal2(&self) -> Vec<f64> {
        let dim = self.dim();
        (0..dim)
            .map(|j| math::kahan_sum((0..dim).map(|i| self.probs[i * dim + j])))
            .collect()
    }

    /// Iterate over `(n1, n2, p)` for all cells of the support.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let dim = self.dim();
        self.probs
            .iter()
            .enumerate()
            .map(move |(idx, &p)| (idx / dim, idx % dim, p))
    }
}

/// Thermal (geometric) pmf with mean `mean`: `m^k / (1+m)^(k+1)`.
pub fn thermal_pmf(k: u64, mean: f64) -> f64 {
    math::exp(ln_thermal_pmf(k, mean))
}

pub fn ln_thermal_pmf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let ln1p = math::ln_1p(mean);
    -ln1p + k as f64 * (math::ln(mean) - ln1p)
}

/// `P(n > c)` for a thermal law.
fn thermal_tail(c: usize, mean: f64) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    math::exp((c as f64 + 1.0) * (math::ln(mean) - math::ln_1p(mean)))
}

pub fn poisson_pmf(k: u64, mean: f64) -> f64 {
    math::exp(ln_poisson_pmf(k, mean))
}

pub fn ln_poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -mean + k as f64 * math::ln(mean) - math::ln_factorial(k)
}

/// `P(n > c)` for a Poisson law, summed directly over the upper tail.
fn poisson_tail(c: usize, mean: f64) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut k = c as u64 + 1;
    let mut term = poisson_pmf(k, mean);
    let mut sum = math::KahanSum::new();
    loop {
        sum.add(term);
        k += 1;
        term *= mean / k as f64;
        if (k as f64 > mean && term <= 1e-18 * sum.value()) || term == 0.0 {
            break;
        }
    }
    sum.value()
}

/// Twin-beam photon-number law: `p(n, n) = (1-x²) x^(2n)`, zero off the diagonal.
pub fn twb_joint(n_mean: f64, trunc: Truncation) -> Result<JointCountDistribution> {
    check_domain(
        n_mean.is_finite() && n_mean >= 0.0,
        "n_mean",
        n_mean,
        "0 <= n_mean < inf",
    )?;
    let cutoff = trunc.resolve(|c| thermal_tail(c, n_mean))?;
    let dim = cutoff + 1;
    let mut probs = vec![0.0; dim * dim];
    for k in 0..dim {
        probs[k * dim + k] = thermal_pmf(k as u64, n_mean);
    }
    Ok(JointCountDistribution::from_parts(cutoff, probs))
}

/// Factorized coherent pair: product of two Poisson laws of mean `N`.
pub fn coherent_joint(n_mean: f64, trunc: Truncation) -> Result<JointCountDistribution> {
    check_domain(
        n_mean.is_finite() && n_mean >= 0.0,
        "n_mean",
        n_mean,
        "0 <= n_mean < inf",
    )?;
    let cutoff = trunc.resolve(|c| 2.0 * poisson_tail(c, n_mean))?;
    let dim = cutoff + 1;
    let marginal: Vec<f64> = (0..dim).map(|k| poisson_pmf(k as u64, n_mean)).collect();
    let mut probs = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            probs[i * dim + j] = marginal[i] * marginal[j];
        }
    }
    Ok(JointCountDistribution::from_parts(cutoff, probs))
}

/// Thermal beam of mean `2N` split with transmissivity `tau`:
/// `p(n1, n2) = C(n1+n2, n1) τ^n1 (1-τ)^n2 ν_(n1+n2)`.
pub fn split_thermal_joint(
    n_mean: f64,
    tau: f64,
    trunc: Truncation,
) -> Result<JointCountDistribution> {
    check_domain(
        n_mean.is_finite() && n_mean >= 0.0,
        "n_mean",
        n_mean,
        "0 <= n_mean < inf",
    )?;
    check_domain((0.0..=1.0).contains(&tau), "tau", tau, "0 <= tau <= 1")?;
    let input_mean = 2.0 * n_mean;
    let (mean1, mean2) = (input_mean * tau, input_mean * (1.0 - tau));
    let cutoff = trunc.resolve(|c| thermal_tail(c, mean1) + thermal_tail(c, mean2))?;
    let dim = cutoff + 1;
    let mut probs = vec![0.0; dim * dim];
    for n1 in 0..dim as u64 {
        for n2 in 0..dim as u64 {
            let ln_p = math::ln_choose(n1 + n2, n1)
                + math::ln_pow(tau, n1)
                + math::ln_pow(1.0 - tau, n2)
                + ln_thermal_pmf(n1 + n2, input_mean);
            probs[n1 as usize * dim + n2 as usize] = math::exp(ln_p);
        }
    }
    Ok(JointCountDistribution::from_parts(cutoff, probs))
}

/// Natural log of the multithermal density of `mu` equally populated thermal
/// modes with overall mean `v_t`. Real `mu ≥ 1` is accepted.
pub fn ln_multithermal_pdf(v: f64, mu: f64, v_t: f64) -> Result<f64> {
    check_domain(v >= 0.0, "v", v, "v >= 0")?;
    check_domain(mu >= 1.0 && mu.is_finite(), "mu", mu, "mu >= 1")?;
    check_domain(v_t > 0.0 && v_t.is_finite(), "v_t", v_t, "v_t > 0")?;
    let scale = v_t / mu;
    if v == 0.0 {
        return Ok(if mu == 1.0 {
            -math::ln(scale)
        } else {
            f64::NEG_INFINITY
        });
    }
    Ok(-v / scale + (mu - 1.0) * math::ln(v) - math::ln_gamma(mu) - mu * math::ln(scale))
}

/// Multithermal density `exp(-vμ/V_T) v^(μ-1) / ((μ-1)! (V_T/μ)^μ)`.
pub fn multithermal_pdf(v: f64, mu: f64, v_t: f64) -> Result<f64> {
    ln_multithermal_pdf(v, mu, v_t).map(math::exp)
}
