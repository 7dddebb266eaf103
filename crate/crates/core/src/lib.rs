//! Desk-scale simulator and solver suite for a laser-based indoor optical
//! wireless network serving user groups with power-domain NOMA under a
//! blind-interference-alignment outer precoder.
//!
//! The crate is organized along the processing pipeline:
//!
//! - [`geometry`]: room, AP grid, reconfigurable detector, angles.
//! - [`channel`]: Gaussian-beam propagation, channel matrices, blockage,
//!   noise, eye-safety power limits.
//! - [`bia`]: transmission-block construction and the two alignment
//!   conditions, plus block-sparse precoders.
//! - [`rate`]: NOMA SINRs and log-det rates with the post-subtraction noise
//!   covariance.
//! - [`grouping`]: distance-weight matrices and max-weight weak/strong
//!   pairing.
//! - [`power`]: budget discretization, the per-group Dinkelbach/KKT solver,
//!   the cross-group recursion and solution selection.
//! - [`baselines`]: the dynamic scheme and its four comparison schemes.
//! - [`harness`]: scenario config, Monte Carlo drops, metrics and sweeps.
//! - [`oracle`]: brute-force equivalence oracles used by tests and the CLI.

pub mod baselines;
pub mod bia;
pub mod channel;
pub mod error;
pub mod geometry;
pub mod grouping;
pub mod harness;
pub mod oracle;
pub mod power;
pub mod rate;

pub use error::{Error, Result};
