use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::required_samples;
use crate::error::{ensure, Result};
use crate::pomdp::{rng_from_seed, rollout_seed};

/// Empirical false-pass rate next to its closed form and the exponential bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub true_mass: f64,
    pub delta: f64,
    pub nu: f64,
    pub m: u64,
    pub trials: u64,
    pub seed: u64,
    pub passes: u64,
    pub empirical: f64,
    /// `(1 − true_mass)^m`
    pub closed_form: f64,
    /// `e^{−true_mass·m}`
    pub true_mass_bound: f64,
    /// `e^{−δ·m}`, which is at most `ν` by the choice of `m`.
    pub bound: f64,
}

/// Simulates `trials` certifications against a source whose sequences are
/// misaligned with probability exactly `true_mass`, and counts how many pass
/// all `m` checks. Each trial stops at its first misaligned draw.
pub fn soundness_experiment(
    true_mass: f64,
    delta: f64,
    nu: f64,
    trials: u64,
    seed: u64,
) -> Result<SoundnessReport> {
    ensure!(
        true_mass > delta && true_mass <= 1.0,
        "true_mass must lie in (delta, 1], got {true_mass}"
    );
    ensure!(trials >= 1, "trials must be at least 1");
    let m = required_samples(delta, nu)?;
    let passes: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from_seed(rollout_seed(seed, t));
            let passed = (0..m).all(|_| rng.gen::<f64>() >= true_mass);
            u64::from(passed)
        })
        .sum();
    Ok(SoundnessReport {
        true_mass,
        delta,
        nu,
        m,
        trials,
        seed,
        passes,
        empirical: passes as f64 / trials as f64,
        closed_form: (1.0 - true_mass).powi(m as i32),
        true_mass_bound: (-true_mass * m as f64).exp(),
        bound: (-delta * m as f64).exp(),
    })
}
