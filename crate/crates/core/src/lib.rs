//! Uplink interference analysis for multi-cell massive MIMO with MRC and ZF
//! receivers.
//!
//! UEs are placed by a stochastic-geometry model (uniform users in the typical
//! cell, one Poisson process per pilot outside it). Per-realization interference
//! components averaged over small-scale fading are checked three ways: against
//! an explicit Rayleigh-fading Monte Carlo ([`fading`]), and, across spatial
//! realizations, against closed-form means, variances and bounds
//! ([`analytics`]). [`runner`] drives the campaigns and [`output`] writes the
//! CSV/JSON artifacts.

pub mod analytics;
pub mod config;
pub mod error;
pub mod fading;
pub mod interference;
pub mod output;
pub mod propagation;
pub mod runner;
pub mod spatial;
pub mod stats;
pub mod streams;

pub use config::{table2_default, DerivedConstants, SystemConfig};
pub use error::{Error, Result};
pub use interference::{InterferenceSample, Receiver};
pub use propagation::LargeScaleState;
