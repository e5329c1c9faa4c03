//! Multi-cell massive MIMO uplink simulation under pilot contamination.
//!
//! The crate covers the whole chain used to study per-user pilot power
//! allocation in a target cell:
//!
//! - [`scenario`]: system constants, hexagonal layout, user drops and
//!   large-scale fading.
//! - [`airlink`]: Rayleigh channels, the pilot-phase received matrix and
//!   Monte-Carlo moments of the MRC effective SINR.
//! - [`estimators`]: LS and MMSE channel estimates.
//! - [`metrics`]: relative channel estimation error (RCEE), its expectation,
//!   SINR and achievable rate in closed form, with their large-array limits.
//! - [`ppa`]: the user-grouping pilot power allocation and its high-power
//!   asymptotics.
//! - [`refsolver`]: a projected-gradient reference solver for the box and
//!   budget constrained allocation problem.
//! - [`harness`]: seeded Monte-Carlo experiments that produce the figure
//!   data sets.
//! - [`cli`]: argument parsing and CSV emission behind the `mimo-pilot`
//!   binary.
//!
//! Everything is expressed from the point of view of one target cell, which
//! is always cell index 0. Powers are linear and normalized to unit noise
//! variance.

pub mod airlink;
pub mod cli;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod metrics;
pub mod ppa;
pub mod refsolver;
pub mod rng;
pub mod scenario;
pub mod stats;

pub use error::{Error, Result};
pub use estimators::EstimationMethod;
pub use scenario::{BetaSlice, PowerMatrix, SystemConfig};

/// Converts a decibel value to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to decibels.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}
