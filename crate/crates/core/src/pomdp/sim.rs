use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::policy::Policy;
use super::reward::SequenceReward;
use super::spec::{PomdpSpec, Row};
use super::trajectory::{Step, Trajectory};
use crate::error::{ensure, Error, Result};

/// Default limit on the enumerated support of `P_π`.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Seed of rollout `index` under base seed `base`. Stable across platforms and
/// independent of how rollouts are scheduled.
pub fn rollout_seed(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Inverse-CDF draw over categories in index order.
fn draw_sparse(row: &Row, u: f64) -> usize {
    let entries = row.entries();
    let mut acc = 0.0;
    for &(i, p) in entries {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the final partial sum
    entries.last().map(|e| e.0).unwrap_or(0)
}

fn draw_dense(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in row.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        last = i;
        acc += p;
        if u < acc {
            return i;
        }
    }
    last
}

fn check_pair(spec: &PomdpSpec, policy: &Policy) -> Result<()> {
    policy.validate_for(spec)
}

pub(crate) fn sample_with<R: Rng>(spec: &PomdpSpec, policy: &Policy, rng: &mut R) -> Trajectory {
    let mut steps = Vec::with_capacity(spec.horizon());
    let mut history: Vec<(usize, usize)> = Vec::with_capacity(spec.horizon());
    for t in 0..spec.horizon() {
        let row = if t == 0 {
            spec.initial()
        } else {
            spec.next_state_row(&history)
        };
        let state = draw_sparse(row, rng.gen::<f64>());
        let obs = draw_sparse(spec.observation_row(state), rng.gen::<f64>());
        let action = draw_dense(policy.row(obs), rng.gen::<f64>());
        history.push((state, action));
        steps.push(Step { state, obs, action });
    }
    Trajectory::new(steps)
}

/// Draws one trajectory from `P_π`: state, then observation, then action at
/// each step. A pure function of `(spec, policy, seed)`.
pub fn sample_trajectory(spec: &PomdpSpec, policy: &Policy, seed: u64) -> Result<Trajectory> {
    check_pair(spec, policy)?;
    Ok(sample_with(spec, policy, &mut rng_from_seed(seed)))
}

/// Exact `P_π` of a full trajectory.
pub fn trajectory_probability(spec: &PomdpSpec, policy: &Policy, traj: &Trajectory) -> Result<f64> {
    check_pair(spec, policy)?;
    traj.validate_for(spec)?;
    let mut prob = 1.0;
    let mut history = Vec::with_capacity(traj.len());
    for (t, step) in traj.steps.iter().enumerate() {
        let row = if t == 0 {
            spec.initial()
        } else {
            spec.next_state_row(&history)
        };
        prob *= row.prob(step.state);
        prob *= spec.observation_row(step.state).prob(step.obs);
        prob *= policy.row(step.obs)[step.action];
        if prob == 0.0 {
            return Ok(0.0);
        }
        history.push((step.state, step.action));
    }
    Ok(prob)
}

/// Upper bound on the number of nonzero-probability trajectories, from the
/// widest row of every kernel and of the policy.
pub fn support_bound(spec: &PomdpSpec, policy: &Policy) -> f64 {
    let (b_init, b_trans, b_obs) = spec.max_supports();
    let b_act = policy
        .table
        .iter()
        .map(|r| r.iter().filter(|p| **p != 0.0).count())
        .max()
        .unwrap_or(0) as f64;
    let per_step = b_trans as f64 * b_obs as f64 * b_act;
    b_init as f64 * b_obs as f64 * b_act * per_step.powi(spec.horizon() as i32 - 1)
}

/// Exact support of `P_π` as `(trajectory, probability)` pairs, in depth-first
/// index order, using [`DEFAULT_ENUMERATION_CAP`].
pub fn enumerate_trajectories(spec: &PomdpSpec, policy: &Policy) -> Result<Vec<(Trajectory, f64)>> {
    enumerate_trajectories_capped(spec, policy, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_trajectories_capped(
    spec: &PomdpSpec,
    policy: &Policy,
    cap: u64,
) -> Result<Vec<(Trajectory, f64)>> {
    check_pair(spec, policy)?;
    let bound = support_bound(spec, policy);
    if bound > cap as f64 {
        return Err(Error::Capacity {
            bound: format!(
                "support bound of `{}` (initial·(transition·observation·action)^(T-1) row widths, T = {})",
                spec.id(),
                spec.horizon()
            ),
            value: bound,
            cap: cap as f64,
            hint: String::new(),
        });
    }
    let mut out = Vec::new();
    let mut steps = Vec::with_capacity(spec.horizon());
    let mut history = Vec::with_capacity(spec.horizon());
    descend(spec, policy, 1.0, &mut steps, &mut history, &mut out);
    Ok(out)
}

fn descend(
    spec: &PomdpSpec,
    policy: &Policy,
    prob: f64,
    steps: &mut Vec<Step>,
    history: &mut Vec<(usize, usize)>,
    out: &mut Vec<(Trajectory, f64)>,
) {
    let t = steps.len();
    if t == spec.horizon() {
        out.push((Trajectory::new(steps.clone()), prob));
        return;
    }
    let row = if t == 0 {
        spec.initial()
    } else {
        spec.next_state_row(history)
    };
    for &(state, ps) in row.entries() {
        let p_state = prob * ps;
        for &(obs, po) in spec.observation_row(state).entries() {
            let p_obs = p_state * po;
            for (action, &pa) in policy.row(obs).iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                let p = p_obs * pa;
                if p == 0.0 {
                    continue;
                }
                steps.push(Step { state, obs, action });
                history.push((state, action));
                descend(spec, policy, p, steps, history, out);
                steps.pop();
                history.pop();
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EvalMode {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

/// An expected-reward value; `std_error` is 0 in exact mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: Option<u64>,
}

/// `E_{P_π}[R]`, exactly by enumeration or as a seeded Monte-Carlo mean.
pub fn expected_reward(
    spec: &PomdpSpec,
    policy: &Policy,
    reward: &SequenceReward,
    mode: EvalMode,
) -> Result<Estimate> {
    match mode {
        EvalMode::Exact => {
            let mut pivot = None;
            let mut shift = 0.0;
            for (traj, p) in enumerate_trajectories(spec, policy)? {
                let r = reward.evaluate(&traj)?;
                let r0 = *pivot.get_or_insert(r);
                shift += p * (r - r0);
            }
            let mean = pivot.unwrap_or(0.0) + shift;
            Ok(Estimate {
                mean,
                std_error: 0.0,
                samples: None,
            })
        }
        EvalMode::MonteCarlo { samples, seed } => {
            ensure!(samples >= 1, "monte_carlo needs at least one sample");
            check_pair(spec, policy)?;
            let values = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let mut rng = rng_from_seed(rollout_seed(seed, i));
                    reward.evaluate(&sample_with(spec, policy, &mut rng))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(mean_and_error(&values))
        }
    }
}

pub(crate) fn mean_and_error(values: &[f64]) -> Estimate {
    let n = values.len() as f64;
    // shifted by the first value, so a constant sample gives its value exactly
    let pivot = values[0];
    let mean = pivot + values.iter().map(|v| v - pivot).sum::<f64>() / n;
    let std_error = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Estimate {
        mean,
        std_error,
        samples: Some(values.len() as u64),
    }
}

/// Restriction of enumerated `P_π` to state sequences, by summing out
/// observations and actions.
pub fn state_marginal(entries: &[(Trajectory, f64)]) -> BTreeMap<Vec<usize>, f64> {
    let mut out = BTreeMap::new();
    for (traj, p) in entries {
        *out.entry(traj.states()).or_insert(0.0) += p;
    }
    out
}

/// Law of the state sequence computed directly, without materialising full
/// trajectories: at every step the observation and action are integrated out
/// analytically, carrying a joint weight over the recent action window.
pub fn state_sequence_law(spec: &PomdpSpec, policy: &Policy) -> Result<BTreeMap<Vec<usize>, f64>> {
    check_pair(spec, policy)?;
    let bound = support_bound(spec, policy);
    if bound > DEFAULT_ENUMERATION_CAP as f64 {
        return Err(Error::Capacity {
            bound: format!("support bound of `{}`", spec.id()),
            value: bound,
            cap: DEFAULT_ENUMERATION_CAP as f64,
            hint: String::new(),
        });
    }
    // action law given state: sum_o P[o|s] π(a|o)
    let action_given_state: Vec<Vec<f64>> = (0..spec.n_states())
        .map(|s| {
            let mut row = vec![0.0; spec.n_actions()];
            for &(o, po) in spec.observation_row(s).entries() {
                for (a, pa) in policy.row(o).iter().enumerate() {
                    row[a] += po * pa;
                }
            }
            row
        })
        .collect();

    let mut out = BTreeMap::new();
    let mut states = Vec::with_capacity(spec.horizon());
    for &(s, p) in spec.initial().entries() {
        let mut weights = HashMap::new();
        weights.insert(Vec::new(), p);
        states.push(s);
        extend_states(spec, &action_given_state, &mut states, weights, &mut out);
        states.pop();
    }
    Ok(out)
}

/// `weights` maps the actions taken so far at the states in `states` (minus
/// the last state, whose action is not yet drawn) to their joint probability
/// with the state prefix. Only the trailing window is kept.
fn extend_states(
    spec: &PomdpSpec,
    action_given_state: &[Vec<f64>],
    states: &mut Vec<usize>,
    weights: HashMap<Vec<usize>, f64>,
    out: &mut BTreeMap<Vec<usize>, f64>,
) {
    if states.len() == spec.horizon() {
        let total: f64 = weights.values().sum();
        if total > 0.0 {
            *out.entry(states.clone()).or_insert(0.0) += total;
        }
        return;
    }
    let current = *states.last().expect("non-empty prefix");
    let window = spec.window();
    let keep = window.min(states.len());
    // next-state weights grouped by successor, then by retained action window
    let mut by_next: BTreeMap<usize, HashMap<Vec<usize>, f64>> = BTreeMap::new();
    let mut sorted: Vec<_> = weights.into_iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    for (actions, w) in sorted {
        for (a, &pa) in action_given_state[current].iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            let mut acts = actions.clone();
            acts.push(a);
            let start = states.len() - keep;
            let history: Vec<(usize, usize)> = states[start..]
                .iter()
                .zip(&acts[acts.len() - keep..])
                .map(|(&s, &a)| (s, a))
                .collect();
            let row = spec.next_state_row(&history);
            let retained = trailing(&acts, window - 1);
            for &(next, ps) in row.entries() {
                let p = w * pa * ps;
                if p == 0.0 {
                    continue;
                }
                *by_next
                    .entry(next)
                    .or_default()
                    .entry(retained.clone())
                    .or_insert(0.0) += p;
            }
        }
    }
    for (next, w) in by_next {
        states.push(next);
        extend_states(spec, action_given_state, states, w, out);
        states.pop();
    }
}

fn trailing(acts: &[usize], n: usize) -> Vec<usize> {
    acts[acts.len().saturating_sub(n)..].to_vec()
}
