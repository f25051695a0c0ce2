use serde::{Deserialize, Serialize};

use super::buffered::BufferedEnv;
use super::verifier::Verifier;
use crate::error::{ensure, Result};
use crate::pomdp::{
    enumerate_trajectories, rng_from_seed, rollout_seed, sample_with, state_sequence_law, Policy,
    PomdpSpec, Trajectory,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MeasureMode {
    Exact,
    Sampled { n: u64, seed: u64 },
}

/// Probability that the verifier rejects the state sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub verifier_id: String,
    pub policy_id: String,
    pub misalignment_mass: f64,
    pub method: MeasureMode,
    /// A misaligned trajectory: the most probable one in exact mode, the first
    /// one drawn in sampled mode.
    pub witness: Option<Trajectory>,
}

impl AlignmentReport {
    pub fn is_delta_aligned(&self, delta: f64) -> bool {
        self.misalignment_mass <= delta
    }
}

pub fn measure_delta_alignment(
    spec: &PomdpSpec,
    policy: &Policy,
    verifier: &Verifier,
    mode: MeasureMode,
) -> Result<AlignmentReport> {
    let (mass, witness) = match mode {
        MeasureMode::Exact => {
            let mut mass = 0.0;
            let mut witness: Option<(Trajectory, f64)> = None;
            for (traj, p) in enumerate_trajectories(spec, policy)? {
                if !verifier.is_aligned(&traj.states()) {
                    mass += p;
                    if witness.as_ref().is_none_or(|(_, best)| p > *best) {
                        witness = Some((traj, p));
                    }
                }
            }
            (mass.min(1.0), witness.map(|w| w.0))
        }
        MeasureMode::Sampled { n, seed } => {
            ensure!(n >= 1, "sampled mode needs n >= 1");
            policy.validate_for(spec)?;
            let mut bad = 0u64;
            let mut witness = None;
            for i in 0..n {
                let traj = sample_with(spec, policy, &mut rng_from_seed(rollout_seed(seed, i)));
                if !verifier.is_aligned(&traj.states()) {
                    bad += 1;
                    if witness.is_none() {
                        witness = Some(traj);
                    }
                }
            }
            (bad as f64 / n as f64, witness)
        }
    };
    Ok(AlignmentReport {
        verifier_id: verifier.id().to_string(),
        policy_id: policy.id.clone(),
        misalignment_mass: mass,
        method: mode,
        witness,
    })
}

/// Misalignment mass from the directly computed state-sequence law.
pub fn misalignment_mass_direct(spec: &PomdpSpec, policy: &Policy, verifier: &Verifier) -> Result<f64> {
    Ok(state_sequence_law(spec, policy)?
        .iter()
        .filter(|(states, _)| !verifier.is_aligned(states))
        .map(|(_, p)| p)
        .sum())
}

/// The learner's output is δ-aligned inside the simulator.
pub fn is_non_strategic(
    buf: &BufferedEnv,
    policy: &Policy,
    buffered_verifier: &Verifier,
    delta: f64,
    mode: MeasureMode,
) -> Result<bool> {
    let report = measure_delta_alignment(buf.buffered(), policy, buffered_verifier, mode)?;
    Ok(report.misalignment_mass <= delta)
}
