//! JSON run configurations, one per subcommand.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use twinbeam_core::{EfficiencyPair, SourceKind, DEFAULT_TAIL_TOL};

use crate::error::{CliError, CliResult};

fn one() -> u32 {
    1
}

fn half() -> f64 {
    0.5
}

fn tail_tol() -> f64 {
    DEFAULT_TAIL_TOL
}

fn yes() -> bool {
    true
}

fn all_sources() -> Vec<SourceKind> {
    SourceKind::ALL.to_vec()
}

fn default_lags() -> Vec<i64> {
    vec![0, 1, 2, 3]
}

fn default_batches() -> usize {
    100
}

fn default_channels() -> Vec<u8> {
    vec![1, 2]
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation(msg()))
    }
}

/// `steps` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        twinbeam_core::analysis::linspace(self.start, self.stop, self.steps)
    }

    fn validate(&self, name: &str) -> CliResult<()> {
        check(
            self.steps >= 1 && self.start.is_finite() && self.stop.is_finite(),
            || format!("grid `{name}` needs finite bounds and steps >= 1"),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticConfig {
    #[serde(default = "all_sources")]
    pub sources: Vec<SourceKind>,
    /// Mean photon number per beam, summed over modes.
    pub n_mean: f64,
    #[serde(default = "one")]
    pub mu: u32,
    #[serde(default = "half")]
    pub tau: f64,
    pub eff: EfficiencyPair,
    #[serde(default)]
    pub d_range: Option<(i64, i64)>,
    #[serde(default = "tail_tol")]
    pub tail_tol: f64,
    /// Also emit the detected joint law of each source (single mode pair only).
    #[serde(default)]
    pub joint: bool,
}

impl AnalyticConfig {
    pub fn validate(&self) -> CliResult<()> {
        check(!self.sources.is_empty(), || "`sources` is empty".into())?;
        check(self.tail_tol > 0.0 && self.tail_tol < 1.0, || {
            format!("`tail_tol` = {} violates 0 < tail_tol < 1", self.tail_tol)
        })?;
        check(!(self.joint && self.mu > 1), || {
            "`joint` tables are only produced for mu = 1".into()
        })?;
        if let Some((lo, hi)) = self.d_range {
            check(lo <= hi, || format!("`d_range` = ({lo}, {hi}) needs lo <= hi"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "all_sources")]
    pub sources: Vec<SourceKind>,
    pub eff: EfficiencyPair,
    /// Photon numbers for the `σ²(d)` versus `N` table.
    pub n_values: Grid,
    /// Balanced efficiencies for the `σ²(d)/N` versus `η` table.
    #[serde(default)]
    pub eta_values: Option<Grid>,
    /// Photon number used in the efficiency table.
    #[serde(default = "one_f")]
    pub n_ref: f64,
    #[serde(default = "one")]
    pub mu: u32,
}

fn one_f() -> f64 {
    1.0
}

impl SweepConfig {
    pub fn validate(&self) -> CliResult<()> {
        check(!self.sources.is_empty(), || "`sources` is empty".into())?;
        self.n_values.validate("n_values")?;
        check(self.n_values.start >= 0.0 && self.n_values.stop >= 0.0, || {
            "`n_values` must be >= 0".into()
        })?;
        if let Some(g) = &self.eta_values {
            g.validate("eta_values")?;
            let ok = |v: f64| (0.0..=1.0).contains(&v);
            check(ok(g.start) && ok(g.stop), || "`eta_values` must lie in [0, 1]".into())?;
        }
        check(self.mu >= 1, || "`mu` must be >= 1".into())?;
        check(self.n_ref > 0.0, || "`n_ref` must be > 0".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// Shot CSV; the sidecar is looked up next to it.
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default = "default_lags")]
    pub lags: Vec<i64>,
    /// Blocks used for batch-means standard errors.
    #[serde(default = "default_batches")]
    pub batches: usize,
    /// Fit the multithermal law to each channel.
    #[serde(default)]
    pub fit: bool,
    #[serde(default = "yes")]
    pub integer_mu: bool,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            input: None,
            lags: default_lags(),
            batches: default_batches(),
            fit: false,
            integer_mu: true,
        }
    }
}

impl AnalyzeConfig {
    pub fn validate(&self) -> CliResult<()> {
        check(self.input.is_some(), || "no input file (`input` or --input)".into())?;
        check(self.batches >= 2, || "`batches` must be >= 2".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default = "default_channels")]
    pub channels: Vec<u8>,
    #[serde(default = "yes")]
    pub integer_mu: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            input: None,
            channels: default_channels(),
            integer_mu: true,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> CliResult<()> {
        check(self.input.is_some(), || "no input file (`input` or --input)".into())?;
        check(
            !self.channels.is_empty() && self.channels.iter().all(|c| *c == 1 || *c == 2),
            || "`channels` must be a non-empty subset of [1, 2]".into(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBudgetConfig {
    pub kind: SourceKind,
    /// Difference variance with instrument noise already subtracted.
    pub sigma2_measured: f64,
    pub m1: f64,
    pub m2: f64,
    pub mu: u32,
    pub eta1: Grid,
    pub eta2: Grid,
    /// Nominal efficiency for the imbalance interval and the balanced solve.
    #[serde(default)]
    pub eta_nominal: Option<f64>,
    /// Externally reported pump noise, echoed for comparison.
    #[serde(default)]
    pub reference_x: Option<f64>,
}

impl NoiseBudgetConfig {
    pub fn validate(&self) -> CliResult<()> {
        self.eta1.validate("eta1")?;
        self.eta2.validate("eta2")?;
        let inside = |g: &Grid| g.start > 0.0 && g.start <= 1.0 && g.stop > 0.0 && g.stop <= 1.0;
        check(inside(&self.eta1) && inside(&self.eta2), || {
            "efficiency grids must lie in (0, 1]".into()
        })
    }
}
