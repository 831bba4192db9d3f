//! Joint photodetection statistics of quantum-correlated (twin-beam) and
//! classically-correlated (beam-split thermal) light.
//!
//! The crate is organised bottom-up:
//!
//! - [`statekit`]: photon-number joint laws of the three benchmark two-mode
//!   sources, plus the multithermal density.
//! - [`detector`]: Bernoulli thinning by the detector quantum efficiency,
//!   detected-count moments and multimode composition.
//! - [`markers`]: correlation coefficient, difference-photocurrent law and
//!   variance, and the threshold photon number.
//! - [`simshots`]: seeded per-shot Monte Carlo of detected counts or voltages,
//!   including pump excess noise and instrument noise.
//! - [`analysis`]: estimators and inverse problems on shot series (correlation
//!   function, noise-subtracted markers, multithermal fitting, efficiency
//!   imbalance and pump-noise inversion).
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. IO, file formats and the command line live in the `twinbeam`
//! companion crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analysis;
pub mod bessel;
pub mod detector;
mod error;
pub mod markers;
pub mod math;
pub mod simshots;
pub mod statekit;

pub use error::{Error, Result};

pub use detector::{EfficiencyPair, MomentSet};
pub use markers::{DifferenceDistribution, Threshold, VarianceReport};
pub use simshots::{OutputMode, PumpModel, ShotSeries, SimulationConfig, Unit};
pub use statekit::{JointCountDistribution, SourceKind, SourceSpec, Truncation};

/// Default bound on the probability mass discarded by truncation.
pub const DEFAULT_TAIL_TOL: f64 = 1e-10;
