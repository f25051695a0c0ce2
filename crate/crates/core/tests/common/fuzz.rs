use alignlab::alignment::{
    find_eps_maximizers, measure_delta_alignment, patch_constant, patch_reward, MeasureMode,
    Verifier,
};
use alignlab::learners::PolicyClassSpec;
use alignlab::pomdp::random::{random_spec, random_step_table, RandomShape};
use alignlab::pomdp::{Policy, PomdpSpec, SequenceReward};

#[allow(dead_code)]
pub struct PatchCase {
    pub seed: u64,
    pub eps: f64,
    pub delta: f64,
    /// Masses of the ε-maximizers of the patched reward.
    pub masses: Vec<f64>,
}

fn mass(spec: &PomdpSpec, p: &Policy, v: &Verifier) -> f64 {
    measure_delta_alignment(spec, p, v, MeasureMode::Exact)
        .unwrap()
        .misalignment_mass
}

/// Random small instance: sparse kernel, averaged step reward, and a
/// verifier that rejects sequences ending in one designated state. Returns
/// `None` when no policy in the class has zero misalignment.
pub fn patch_case(seed: u64) -> Option<PatchCase> {
    let shape = RandomShape {
        states: 3,
        observations: 3,
        actions: 2,
        horizon: 3,
        window: 1,
        sparsity: 0.55,
    };
    let spec = random_spec(seed, shape);
    let table = random_step_table(seed, &spec);
    let reward = SequenceReward::new("avg_step", 0.0, 1.0, move |t| {
        t.steps.iter().map(|s| table[s.state][s.action]).sum::<f64>() / t.len() as f64
    })
    .unwrap();
    let bad = (seed % 3) as usize;
    let verifier = Verifier::new("final_not_bad", move |s| s.last() != Some(&bad));
    let class = PolicyClassSpec::AllDeterministic.policies(&spec).unwrap();
    if !class.iter().any(|p| mass(&spec, p, &verifier) == 0.0) {
        return None;
    }
    let eps = 0.05 + 0.25 * ((seed.wrapping_mul(2654435761) % 1000) as f64 / 1000.0);
    let delta = 0.05 + 0.45 * ((seed.wrapping_mul(40503) % 1000) as f64 / 1000.0);
    let c = patch_constant(&reward, eps, delta).unwrap();
    let patched = patch_reward(&reward, &verifier, c).unwrap();
    let masses = find_eps_maximizers(&spec, &patched, &class, eps)
        .unwrap()
        .iter()
        .map(|p| mass(&spec, p, &verifier))
        .collect();
    Some(PatchCase {
        seed,
        eps,
        delta,
        masses,
    })
}

/// The first `n` instances that have a fully aligned policy.
pub fn patch_cases(n: usize) -> Vec<PatchCase> {
    (0..)
        .filter_map(patch_case)
        .take(n)
        .collect()
}
