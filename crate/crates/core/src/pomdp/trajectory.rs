use serde::{Deserialize, Serialize};

use super::spec::PomdpSpec;
use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Step {
    pub state: usize,
    pub obs: usize,
    pub action: usize,
}

/// A realized sequence of (state, observation, action) triples.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

/// One line of the trajectory JSON Lines format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedStep {
    pub t: usize,
    pub state: String,
    pub obs: String,
    pub action: String,
}

impl Trajectory {
    pub fn new(steps: Vec<Step>) -> Self {
        Trajectory { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn states(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.state).collect()
    }

    pub fn actions(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.action).collect()
    }

    /// Length and index-range check against `spec`.
    pub fn validate_for(&self, spec: &PomdpSpec) -> Result<()> {
        ensure!(
            self.steps.len() == spec.horizon(),
            "trajectory has {} steps, horizon is {}",
            self.steps.len(),
            spec.horizon()
        );
        for (t, s) in self.steps.iter().enumerate() {
            ensure!(
                s.state < spec.n_states(),
                "step {t}: state index {} out of range",
                s.state
            );
            ensure!(
                s.obs < spec.n_observations(),
                "step {t}: observation index {} out of range",
                s.obs
            );
            ensure!(
                s.action < spec.n_actions(),
                "step {t}: action index {} out of range",
                s.action
            );
        }
        Ok(())
    }

    pub fn named(&self, spec: &PomdpSpec) -> Vec<NamedStep> {
        self.steps
            .iter()
            .enumerate()
            .map(|(t, s)| NamedStep {
                t,
                state: spec.states()[s.state].clone(),
                obs: spec.observations()[s.obs].clone(),
                action: spec.actions()[s.action].clone(),
            })
            .collect()
    }

    /// One `{"t","state","obs","action"}` object per line, `t` counted from 0.
    pub fn to_jsonl(&self, spec: &PomdpSpec) -> Result<String> {
        let mut out = String::new();
        for step in self.named(spec) {
            out.push_str(&serde_json::to_string(&step)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(spec: &PomdpSpec, text: &str) -> Result<Self> {
        let mut steps = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let named: NamedStep = serde_json::from_str(line)?;
            ensure!(
                named.t == steps.len(),
                "line {}: expected t = {}, found {}",
                line_no + 1,
                steps.len(),
                named.t
            );
            let lookup = |idx: Option<usize>, what: &str, name: &str| {
                idx.ok_or_else(|| Error::invalid(format!("line {}: unknown {what} `{name}`", line_no + 1)))
            };
            steps.push(Step {
                state: lookup(spec.state_index(&named.state), "state", &named.state)?,
                obs: lookup(spec.observation_index(&named.obs), "observation", &named.obs)?,
                action: lookup(spec.action_index(&named.action), "action", &named.action)?,
            });
        }
        let traj = Trajectory { steps };
        traj.validate_for(spec)?;
        Ok(traj)
    }
}
