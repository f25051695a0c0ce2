//! Alignment testbed over finite-horizon POMDPs.
//!
//! The crate is organised bottom-up:
//!
//! * [`pomdp`]: specs, policies, trajectories, sequence rewards, exact
//!   enumeration and seeded Monte-Carlo evaluation.
//! * [`data`]: learning from a finite dataset (ERM) and its reduction to a
//!   degenerate POMDP whose state law does not depend on the policy.
//! * [`alignment`]: verifiers over state sequences, misalignment mass,
//!   ε-maximizers, aligned-objective checks, reward patching and buffered
//!   environments.
//! * [`certify`]: sample-size computation, certification sessions with an
//!   append-only judgment log, and the false-pass soundness experiment.
//! * [`envs`]: small exactly solvable environments (driving, cauldron,
//!   matrix, coin) plus a catalog used by the service and CLI.
//! * [`learners`]: exact and hill-climbing policy search over finite classes.

// `!(x <= y)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod certify;
pub mod data;
pub mod envs;
pub mod error;
pub mod learners;
pub mod pomdp;

pub use error::{Error, Result};

/// Version string embedded in certificates and reports.
pub const TOOL_VERSION: &str = concat!("alignlab ", env!("CARGO_PKG_VERSION"));
