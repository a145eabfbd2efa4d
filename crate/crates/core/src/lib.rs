//! Tools for two-terminal hypothesis testing where each terminal forwards
//! only the empirical distribution (type) of its own observation sequence.
//!
//! The crate covers three layers:
//!
//! * information geometry of positive joint distributions on finite product
//!   alphabets: natural and expectation coordinates, I-projection onto
//!   marginal constraints, and the projected relative entropy ([`geometry`]);
//! * the defining system of the proxy log-likelihood-ratio test: the aligned
//!   pair of exponential-family members at a given divergence gap, the
//!   additive statistic built from it, exponent functions, and tilted
//!   families ([`solver`]);
//! * decision rules and their evaluation: exact finite-blocklength error
//!   probabilities by type enumeration, seeded Monte-Carlo estimation,
//!   large-deviation exponent curves and second-order (normal-approximation)
//!   quantities ([`schemes`], [`exact`], [`asymptotics`]).
//!
//! The `mhtest` binary exposes the main computations as subcommands that
//! write CSV or JSON artifacts; see [`cli`].

pub mod asymptotics;
pub mod cli;
pub mod dist;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod schemes;
pub mod solver;

pub use dist::JointDistribution;
pub use error::{Error, Result};
