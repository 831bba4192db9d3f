//! Photodetection with finite quantum efficiency.
//!
//! A detector of efficiency `η` registers each incident photon independently
//! with probability `η` (no dark counts), so the detected-count law is the
//! Bernoulli thinning `p(m) = Σ_{n≥m} C(n,m) η^m (1-η)^(n-m) p(n)`.
//! Moments are computed from distributions directly.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_domain, Error, Result};
use crate::math;
use crate::statekit::{JointCountDistribution, SourceKind, SourceSpec, MAX_CUTOFF};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EfficiencyPair {
    pub eta1: f64,
    pub eta2: f64,
}

impl EfficiencyPair {
    pub fn new(eta1: f64, eta2: f64) -> Result<Self> {
        let eff = Self { eta1, eta2 };
        eff.validate()?;
        Ok(eff)
    }

    pub fn balanced(eta: f64) -> Result<Self> {
        Self::new(eta, eta)
    }

    pub fn validate(&self) -> Result<()> {
        check_domain(
            (0.0..=1.0).contains(&self.eta1),
            "eta1",
            self.eta1,
            "0 <= eta1 <= 1",
        )?;
        check_domain(
            (0.0..=1.0).contains(&self.eta2),
            "eta2",
            self.eta2,
            "0 <= eta2 <= 1",
        )
    }

    pub fn is_balanced(&self) -> bool {
        self.eta1 == self.eta2
    }
}

/// First and second moments of a pair of photocurrents.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MomentSet {
    pub mean1: f64,
    pub mean2: f64,
    pub var1: f64,
    pub var2: f64,
    pub cov: f64,
}

impl MomentSet {
    /// Correlation coefficient `cov / (σ1 σ2)`.
    pub fn epsilon(&self) -> Result<f64> {
        if !(self.var1 > 0.0 && self.var2 > 0.0) {
            return Err(Error::UndefinedMarker(
                "correlation coefficient needs nonzero variances",
            ));
        }
        Ok(self.cov / math::sqrt(self.var1 * self.var2))
    }

    /// Variance of the difference `m1 - m2`.
    pub fn diff_variance(&self) -> f64 {
        self.var1 + self.var2 - 2.0 * self.cov
    }

    fn scaled(self, mu: f64) -> Self {
        Self {
            mean1: mu * self.mean1,
            mean2: mu * self.mean2,
            var1: mu * self.var1,
            var2: mu * self.var2,
            cov: mu * self.cov,
        }
    }
}

/// Row-major `(dim × dim)` matrix `T[n][m] = C(n,m) η^m (1-η)^(n-m)`.
fn thinning_matrix(dim: usize, eta: f64) -> Vec<f64> {
    let mut t = vec![0.0; dim * dim];
    for n in 0..dim {
        for m in 0..=n {
            t[n * dim + m] = math::binomial_pmf(n as u64, m as u64, eta);
        }
    }
    t
}

/// Apply independent Bernoulli thinning with efficiencies `η1`, `η2` to a
/// photon-number joint law. The support is unchanged; the tail mass is carried
/// over since thinning only moves probability toward lower counts.
pub fn thin_joint(
    photon_dist: &JointCountDistribution,
    eff: EfficiencyPair,
) -> Result<JointCountDistribution> {
    eff.validate()?;
    let dim = photon_dist.dim();
    let p = photon_dist.probs();
    let t1 = thinning_matrix(dim, eff.eta1);
    let t2 = thinning_matrix(dim, eff.eta2);

    // half[n1][m2] = Σ_n2 p[n1][n2] T2[n2][m2]
    let mut half = vec![0.0; dim * dim];
    for n1 in 0..dim {
        for n2 in 0..dim {
            let w = p[n1 * dim + n2];
            if w == 0.0 {
                continue;
            }
            for m2 in 0..=n2 {
                half[n1 * dim + m2] += w * t2[n2 * dim + m2];
            }
        }
    }
    // out[m1][m2] = Σ_n1 T1[n1][m1] half[n1][m2]
    let mut out = vec![0.0; dim * dim];
    for n1 in 0..dim {
        for m1 in 0..=n1 {
            let w = t1[n1 * dim + m1];
            if w == 0.0 {
                continue;
            }
            let row = &half[n1 * dim..(n1 + 1) * dim];
            let dst = &mut out[m1 * dim..(m1 + 1) * dim];
            for (o, &h) in dst.iter_mut().zip(row) {
                *o += w * h;
            }
        }
    }
    Ok(JointCountDistribution::from_parts(photon_dist.cutoff(), out))
}

/// Moments of a (truncated) joint count law, normalized by its retained mass.
pub fn detected_moments(dist: &JointCountDistribution) -> MomentSet {
    let mut z = math::KahanSum::new();
    let (mut s1, mut s2) = (math::KahanSum::new(), math::KahanSum::new());
    for (a, b, p) in dist.iter() {
        z.add(p);
        s1.add(a as f64 * p);
        s2.add(b as f64 * p);
    }
    let z = z.value();
    let (mean1, mean2) = (s1.value() / z, s2.value() / z);
    let (mut v1, mut v2, mut c) = (
        math::KahanSum::new(),
        math::KahanSum::new(),
        math::KahanSum::new(),
    );
    for (a, b, p) in dist.iter() {
        let (d1, d2) = (a as f64 - mean1, b as f64 - mean2);
        v1.add(d1 * d1 * p);
        v2.add(d2 * d2 * p);
        c.add(d1 * d2 * p);
    }
    MomentSet {
        mean1,
        mean2,
        var1: v1.value() / z,
        var2: v2.value() / z,
        cov: c.value() / z,
    }
}

/// Closed-form detected-count moments. `src.n_mean` is the per-beam total over
/// the `mu` mode pairs; each mode pair carries `N/mu` and contributes
/// independently.
pub fn analytic_moments(src: &SourceSpec, eff: EfficiencyPair) -> Result<MomentSet> {
    src.validate()?;
    eff.validate()?;
    let n = src.per_mode_mean();
    let (e1, e2) = (eff.eta1, eff.eta2);
    let single = match src.kind {
        SourceKind::TwinBeam => {
            let bose = n * (n + 1.0);
            MomentSet {
                mean1: e1 * n,
                mean2: e2 * n,
                var1: e1 * e1 * bose + e1 * (1.0 - e1) * n,
                var2: e2 * e2 * bose + e2 * (1.0 - e2) * n,
                cov: e1 * e2 * bose,
            }
        }
        SourceKind::CoherentPair => MomentSet {
            mean1: e1 * n,
            mean2: e2 * n,
            var1: e1 * n,
            var2: e2 * n,
            cov: 0.0,
        },
        SourceKind::SplitThermal => {
            // input thermal mean T = 2N split binomially; each beam stays thermal
            let t = 2.0 * n;
            let (a, b) = (e1 * src.tau * t, e2 * (1.0 - src.tau) * t);
            MomentSet {
                mean1: a,
                mean2: b,
                var1: a * (1.0 + a),
                var2: b * (1.0 + b),
                cov: e1 * e2 * src.tau * (1.0 - src.tau) * t * t,
            }
        }
    };
    Ok(single.scaled(src.mu as f64))
}

/// Two-dimensional convolution of two joint laws (full support).
fn convolve2(a: &JointCountDistribution, b: &JointCountDistribution) -> Vec<f64> {
    let (da, db) = (a.dim(), b.dim());
    let dim = da + db - 1;
    let mut out = vec![0.0; dim * dim];
    let (pa, pb) = (a.probs(), b.probs());
    for i in 0..da {
        for j in 0..da {
            let w = pa[i * da + j];
            if w == 0.0 {
                continue;
            }
            for k in 0..db {
                let src = &pb[k * db..(k + 1) * db];
                let dst = &mut out[(i + k) * dim + j..(i + k) * dim + j + db];
                for (o, &q) in dst.iter_mut().zip(src) {
                    *o += w * q;
                }
            }
        }
    }
    out
}

/// Shrink a square matrix to the smallest cutoff whose dropped mass is at
/// most `tol`.
fn retruncate(dim: usize, probs: Vec<f64>, tol: f64) -> JointCountDistribution {
    let total = math::kahan_sum(probs.iter().copied());
    let mut inside = math::KahanSum::new();
    let mut cutoff = dim - 1;
    for c in 0..dim {
        for j in 0..=c {
            inside.add(probs[c * dim + j]);
        }
        for i in 0..c {
            inside.add(probs[i * dim + c]);
        }
        if total - inside.value() <= tol {
            cutoff = c;
            break;
        }
    }
    let new_dim = cutoff + 1;
    let mut out = vec![0.0; new_dim * new_dim];
    for i in 0..new_dim {
        out[i * new_dim..(i + 1) * new_dim].copy_from_slice(&probs[i * dim..i * dim + new_dim]);
    }
    JointCountDistribution::from_parts(cutoff, out)
}

/// `mu`-fold convolution of a single-mode-pair law over both counts
/// simultaneously (mode pairs are mutually independent). After each step the
/// support is shrunk, dropping at most `tol` of probability.
pub fn multimode_convolve(
    dist: &JointCountDistribution,
    mu: u32,
    tol: f64,
) -> Result<JointCountDistribution> {
    check_domain(mu >= 1, "mu", mu as f64, "mu >= 1")?;
    check_domain(tol >= 0.0, "tol", tol, "tol >= 0")?;
    let full = dist.cutoff().saturating_mul(mu as usize);
    if full > MAX_CUTOFF && dist.tail_mass() > 0.0 {
        // the product support cannot be represented without further loss
        return Err(Error::TailTolerance {
            tail: dist.tail_mass(),
            tol,
            required_cutoff: full,
        });
    }
    let mut acc = dist.clone();
    for _ in 1..mu {
        let dim = acc.dim() + dist.dim() - 1;
        let probs = convolve2(&acc, dist);
        acc = retruncate(dim, probs, tol);
        if acc.cutoff() > MAX_CUTOFF {
            return Err(Error::TailTolerance {
                tail: acc.tail_mass(),
                tol,
                required_cutoff: acc.cutoff(),
            });
        }
    }
    Ok(acc)
}
