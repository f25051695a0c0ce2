use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::measure::{measure_delta_alignment, MeasureMode};
use super::verifier::Verifier;
use crate::error::{ensure, Result};
use crate::pomdp::{expected_reward, EvalMode, Policy, PomdpSpec, SequenceReward};

/// Slack on value comparisons at the ε-maximizer boundary.
pub const VALUE_TOLERANCE: f64 = 1e-9;

/// Exact value of every policy, in class order.
pub fn policy_values(spec: &PomdpSpec, reward: &SequenceReward, class: &[Policy]) -> Result<Vec<f64>> {
    class
        .par_iter()
        .map(|p| expected_reward(spec, p, reward, EvalMode::Exact).map(|e| e.mean))
        .collect()
}

fn maximizer_indices(values: &[f64], eps: f64) -> Vec<usize> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v >= max - eps - VALUE_TOLERANCE)
        .map(|(i, _)| i)
        .collect()
}

/// Every policy whose value is within `eps` (absolute) of the class maximum.
pub fn find_eps_maximizers(
    spec: &PomdpSpec,
    reward: &SequenceReward,
    class: &[Policy],
    eps: f64,
) -> Result<Vec<Policy>> {
    ensure!(!class.is_empty(), "policy class is empty");
    ensure!(eps >= 0.0 && eps.is_finite(), "eps must be a finite non-negative number");
    let values = policy_values(spec, reward, class)?;
    Ok(maximizer_indices(&values, eps)
        .into_iter()
        .map(|i| class[i].clone())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum ObjectiveVerdict {
    Aligned {
        maximizers: usize,
        worst_mass: f64,
    },
    Misaligned {
        witness: Policy,
        witness_value: f64,
        misalignment_mass: f64,
        maximizers: usize,
    },
}

impl ObjectiveVerdict {
    pub fn is_aligned(&self) -> bool {
        matches!(self, ObjectiveVerdict::Aligned { .. })
    }
}

/// Whether `reward` is an (ε, δ)-aligned objective over `class`: every
/// ε-maximizer must induce misalignment mass at most `delta`. On failure the
/// witness is the highest-valued violating maximizer (earliest in table order
/// among equals).
pub fn check_aligned_objective(
    spec: &PomdpSpec,
    reward: &SequenceReward,
    class: &[Policy],
    verifier: &Verifier,
    eps: f64,
    delta: f64,
) -> Result<ObjectiveVerdict> {
    ensure!(!class.is_empty(), "policy class is empty");
    ensure!(eps >= 0.0 && eps.is_finite(), "eps must be a finite non-negative number");
    ensure!((0.0..=1.0).contains(&delta), "delta must lie in [0, 1]");
    let values = policy_values(spec, reward, class)?;
    let idx = maximizer_indices(&values, eps);
    let masses = idx
        .par_iter()
        .map(|&i| {
            measure_delta_alignment(spec, &class[i], verifier, MeasureMode::Exact)
                .map(|r| r.misalignment_mass)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut witness: Option<(usize, f64)> = None;
    for (&i, &mass) in idx.iter().zip(&masses) {
        if mass <= delta {
            continue;
        }
        let better = match witness {
            None => true,
            Some((j, _)) => {
                values[i] > values[j] + 1e-12
                    || ((values[i] - values[j]).abs() <= 1e-12
                        && class[i].table_cmp(&class[j]).is_lt())
            }
        };
        if better {
            witness = Some((i, mass));
        }
    }
    Ok(match witness {
        Some((i, mass)) => ObjectiveVerdict::Misaligned {
            witness: class[i].clone(),
            witness_value: values[i],
            misalignment_mass: mass,
            maximizers: idx.len(),
        },
        None => ObjectiveVerdict::Aligned {
            maximizers: idx.len(),
            worst_mass: masses.iter().copied().fold(0.0, f64::max),
        },
    })
}

/// `R' = R + c·(R_a − 1)`: misaligned sequences lose `c`, aligned ones are
/// unchanged. The declared range widens to `[r_min − c, r_max]`.
pub fn patch_reward(reward: &SequenceReward, verifier: &Verifier, c: f64) -> Result<SequenceReward> {
    ensure!(c.is_finite() && c > 0.0, "patch constant must be finite and positive, got {c}");
    let (lo, hi) = reward.range();
    let base = reward.clone();
    let ver = verifier.clone();
    SequenceReward::new(
        format!("{}+{}*({}-1)", reward.id(), c, verifier.id()),
        lo - c,
        hi,
        move |traj| {
            // the range check on the base value happens in evaluate(); an
            // out-of-range base poisons the patched value instead
            let r = base.evaluate(traj).unwrap_or(f64::NAN);
            if ver.is_aligned(&traj.states()) {
                r
            } else {
                r - c
            }
        },
    )
}

/// Smallest patch constant for which every ε-maximizer of the patched reward
/// is δ-aligned, provided the class holds a policy with zero misalignment:
/// `(r_max − r_min + ε) / δ`.
pub fn patch_constant(reward: &SequenceReward, eps: f64, delta: f64) -> Result<f64> {
    ensure!(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
    ensure!(eps >= 0.0 && eps.is_finite(), "eps must be a finite non-negative number");
    let (lo, hi) = reward.range();
    Ok((hi - lo + eps) / delta)
}
