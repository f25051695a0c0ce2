use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::class::{capacity, PolicyClassSpec};
use crate::error::{ensure, Result};
use crate::pomdp::{
    expected_reward, rng_from_seed, rollout_seed, support_bound, EvalMode, Policy, PomdpSpec,
    SequenceReward,
};

/// Values within this distance of the maximum count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SearchMethod {
    Exact,
    HillClimb {
        restarts: u32,
        steps: u32,
        mc_samples: u64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_policy: Policy,
    pub best_value: f64,
    /// Monte-Carlo standard error of `best_value`; 0 for exact search.
    pub std_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value_table: Option<BTreeMap<String, f64>>,
    pub method: SearchMethod,
}

#[derive(Debug, Clone, Copy)]
pub struct ExactSearchOptions {
    /// Limit on `class size × per-policy support bound`.
    pub budget: f64,
    pub value_table: bool,
}

impl Default for ExactSearchOptions {
    fn default() -> Self {
        ExactSearchOptions {
            budget: 1e9,
            value_table: false,
        }
    }
}

fn exact_value(spec: &PomdpSpec, reward: &SequenceReward, p: &Policy) -> Result<f64> {
    expected_reward(spec, p, reward, EvalMode::Exact).map(|e| e.mean)
}

/// Evaluates every member of the class exactly and returns the best one.
/// Ties within [`TIE_TOLERANCE`] go to the smallest table.
pub fn exact_policy_search(
    spec: &PomdpSpec,
    reward: &SequenceReward,
    class: &PolicyClassSpec,
    opts: ExactSearchOptions,
) -> Result<SearchResult> {
    class.validate_for(spec)?;
    let size = class.size(spec);
    let cost = match class {
        PolicyClassSpec::Explicit { policies } => {
            policies.iter().map(|p| support_bound(spec, p)).sum::<f64>()
        }
        _ => {
            let widest = class.policy_at(spec, 0)?;
            let per = match class {
                PolicyClassSpec::AllDeterministic => support_bound(spec, &widest),
                _ => support_bound(
                    spec,
                    &Policy::uniform("uniform", spec.n_observations(), spec.n_actions()),
                ),
            };
            size as f64 * per
        }
    };
    if cost > opts.budget {
        return Err(capacity(
            format!("class size ({size}) × support bound"),
            cost,
            opts.budget,
        ));
    }

    let values: Vec<(Policy, f64)> = (0..size as u64)
        .into_par_iter()
        .map(|i| {
            let p = class.policy_at(spec, i as u128)?;
            let v = exact_value(spec, reward, &p)?;
            Ok((p, v))
        })
        .collect::<Result<_>>()?;

    let max = values.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    let (best_policy, best_value) = values
        .iter()
        .filter(|(_, v)| *v >= max - TIE_TOLERANCE)
        .min_by(|a, b| a.0.table_cmp(&b.0))
        .cloned()
        .expect("class is nonempty");
    let value_table = opts
        .value_table
        .then(|| values.iter().map(|(p, v)| (p.id.clone(), *v)).collect());
    Ok(SearchResult {
        best_policy,
        best_value,
        std_error: 0.0,
        value_table,
        method: SearchMethod::Exact,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillClimbConfig {
    pub restarts: u32,
    pub steps: u32,
    pub mc_samples: u64,
    pub seed: u64,
}

/// Random-restart local search. A move changes the row of a single
/// observation; moves are kept when their Monte-Carlo score (common random
/// numbers across policies) improves. The winner is re-scored with an
/// independent seed, so `best_value` is an unbiased estimate of its value.
pub fn hill_climb_search(
    spec: &PomdpSpec,
    reward: &SequenceReward,
    class: &PolicyClassSpec,
    cfg: HillClimbConfig,
) -> Result<SearchResult> {
    ensure!(
        cfg.restarts >= 1 && cfg.steps >= 1 && cfg.mc_samples >= 1,
        "restarts, steps and mc_samples must all be at least 1"
    );
    class.validate_for(spec)?;
    let score_seed = rollout_seed(cfg.seed, 0x5C0E);
    let score = |p: &Policy| -> Result<f64> {
        expected_reward(
            spec,
            p,
            reward,
            EvalMode::MonteCarlo {
                samples: cfg.mc_samples,
                seed: score_seed,
            },
        )
        .map(|e| e.mean)
    };
    let mut rng = rng_from_seed(cfg.seed);
    let mut best: Option<(Policy, f64)> = None;
    let consider = |p: &Policy, s: f64, best: &mut Option<(Policy, f64)>| {
        let replace = match best {
            None => true,
            Some((bp, bs)) => s > *bs || (s == *bs && p.table_cmp(bp).is_lt()),
        };
        if replace {
            *best = Some((p.clone(), s));
        }
    };

    match class.row_options(spec) {
        Some(rows) => {
            let n_obs = spec.n_observations();
            for _ in 0..cfg.restarts {
                let mut coords: Vec<usize> = (0..n_obs).map(|_| rng.gen_range(0..rows.len())).collect();
                let mut cur = class.policy_from_coords(spec, &rows, &coords);
                let mut cur_score = score(&cur)?;
                consider(&cur, cur_score, &mut best);
                if rows.len() < 2 {
                    continue;
                }
                for _ in 0..cfg.steps {
                    let o = rng.gen_range(0..n_obs);
                    let mut r = rng.gen_range(0..rows.len() - 1);
                    if r >= coords[o] {
                        r += 1;
                    }
                    let mut cand = coords.clone();
                    cand[o] = r;
                    let p = class.policy_from_coords(spec, &rows, &cand);
                    let s = score(&p)?;
                    if s > cur_score {
                        coords = cand;
                        cur = p;
                        cur_score = s;
                        consider(&cur, cur_score, &mut best);
                    }
                }
            }
        }
        None => {
            let policies = match class {
                PolicyClassSpec::Explicit { policies } => policies,
                _ => unreachable!(),
            };
            let differs_in_one_row = |a: &Policy, b: &Policy| {
                a.table.iter().zip(&b.table).filter(|(x, y)| x != y).count() == 1
            };
            for _ in 0..cfg.restarts {
                let mut cur = rng.gen_range(0..policies.len());
                let mut cur_score = score(&policies[cur])?;
                consider(&policies[cur], cur_score, &mut best);
                for _ in 0..cfg.steps {
                    let neighbours: Vec<usize> = (0..policies.len())
                        .filter(|&j| differs_in_one_row(&policies[cur], &policies[j]))
                        .collect();
                    if neighbours.is_empty() {
                        break;
                    }
                    let j = neighbours[rng.gen_range(0..neighbours.len())];
                    let s = score(&policies[j])?;
                    if s > cur_score {
                        cur = j;
                        cur_score = s;
                        consider(&policies[cur], cur_score, &mut best);
                    }
                }
            }
        }
    }

    let (best_policy, _) = best.expect("at least one restart");
    let fresh = expected_reward(
        spec,
        &best_policy,
        reward,
        EvalMode::MonteCarlo {
            samples: cfg.mc_samples,
            seed: rollout_seed(cfg.seed, 0xF1E5),
        },
    )?;
    Ok(SearchResult {
        best_policy,
        best_value: fresh.mean,
        std_error: fresh.std_error,
        value_table: None,
        method: SearchMethod::HillClimb {
            restarts: cfg.restarts,
            steps: cfg.steps,
            mc_samples: cfg.mc_samples,
            seed: cfg.seed,
        },
    })
}

