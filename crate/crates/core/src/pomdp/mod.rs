//! Finite-horizon POMDPs: specification, policies, trajectories, sequence
//! rewards, sampling and exact enumeration.

mod policy;
pub mod random;
mod reward;
mod sim;
mod spec;
mod trajectory;

pub use policy::Policy;
pub use reward::SequenceReward;
pub use sim::{
    enumerate_trajectories, enumerate_trajectories_capped, expected_reward, rollout_seed,
    sample_trajectory, state_marginal, state_sequence_law, support_bound, trajectory_probability,
    EvalMode, Estimate, DEFAULT_ENUMERATION_CAP,
};
pub(crate) use sim::{rng_from_seed, sample_with};
pub use spec::{PomdpSpec, Row, SpecParts, ROW_SUM_TOLERANCE};
pub use trajectory::{NamedStep, Step, Trajectory};
