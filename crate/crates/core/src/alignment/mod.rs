//! Verifiers over state sequences, misalignment measurement, aligned-objective
//! checks, reward patching and buffered environments.

mod buffered;
mod measure;
mod objective;
mod verifier;

pub use buffered::{map_trajectory, BufferedEnv};
pub use measure::{
    is_non_strategic, measure_delta_alignment, misalignment_mass_direct, AlignmentReport,
    MeasureMode,
};
pub use objective::{
    check_aligned_objective, find_eps_maximizers, patch_constant, patch_reward, policy_values,
    ObjectiveVerdict, VALUE_TOLERANCE,
};
pub use verifier::Verifier;
