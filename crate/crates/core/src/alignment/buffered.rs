use crate::error::{ensure, Result};
use crate::pomdp::{PomdpSpec, Step, Trajectory};

/// A real environment paired with the simulator the learner trains in, plus
/// the map `μ` from real states to simulator states.
#[derive(Debug, Clone)]
pub struct BufferedEnv {
    pub id: String,
    real: PomdpSpec,
    buffered: PomdpSpec,
    mu: Vec<usize>,
}

impl BufferedEnv {
    pub fn new(id: impl Into<String>, real: PomdpSpec, buffered: PomdpSpec, mu: Vec<usize>) -> Result<Self> {
        ensure!(
            real.observations() == buffered.observations(),
            "real and buffered environments must share the observation set"
        );
        ensure!(
            real.actions() == buffered.actions(),
            "real and buffered environments must share the action set"
        );
        ensure!(
            mu.len() == real.n_states(),
            "state map covers {} states, real environment has {}",
            mu.len(),
            real.n_states()
        );
        if let Some((s, &b)) = mu.iter().enumerate().find(|(_, &b)| b >= buffered.n_states()) {
            return Err(crate::Error::invalid(format!(
                "state map sends `{}` to buffered index {b}, out of range",
                real.states()[s]
            )));
        }
        Ok(BufferedEnv {
            id: id.into(),
            real,
            buffered,
            mu,
        })
    }

    /// The simulator is the real environment itself.
    pub fn identity(id: impl Into<String>, spec: PomdpSpec) -> Self {
        let mu = (0..spec.n_states()).collect();
        BufferedEnv {
            id: id.into(),
            real: spec.clone(),
            buffered: spec,
            mu,
        }
    }

    pub fn real(&self) -> &PomdpSpec {
        &self.real
    }

    pub fn buffered(&self) -> &PomdpSpec {
        &self.buffered
    }

    pub fn mu(&self) -> &[usize] {
        &self.mu
    }
}

/// Applies `μ` to every state; observations and actions are kept.
pub fn map_trajectory(buf: &BufferedEnv, traj: &Trajectory) -> Result<Trajectory> {
    let mut steps = Vec::with_capacity(traj.len());
    for (t, s) in traj.steps.iter().enumerate() {
        ensure!(
            s.state < buf.mu.len(),
            "step {t}: state {} is not a real state",
            s.state
        );
        steps.push(Step {
            state: buf.mu[s.state],
            ..*s
        });
    }
    Ok(Trajectory::new(steps))
}
