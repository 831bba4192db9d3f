//! Multi-threaded shot generation.
//!
//! Every shot draws from its own substream keyed by `(seed, shot index)`, so
//! splitting the index range across workers cannot change the output.

use rayon::prelude::*;
use twinbeam_core::simshots::{sample_range, Shot};
use twinbeam_core::{Result, ShotSeries, SimulationConfig};

/// Shots generated per work item.
pub const CHUNK: usize = 4096;

/// Parallel equivalent of [`twinbeam_core::simshots::sample_series`].
pub fn sample_series_par(cfg: &SimulationConfig) -> Result<ShotSeries> {
    cfg.validate()?;
    let chunks = cfg.shots.div_ceil(CHUNK);
    let shots: Vec<Shot> = (0..chunks)
        .into_par_iter()
        .map(|c| sample_range(cfg, c * CHUNK..((c + 1) * CHUNK).min(cfg.shots)))
        .collect::<Vec<_>>()
        .concat();
    Ok(ShotSeries::from_shots(cfg, &shots))
}
