//! One line per headline criterion, then a single assertion over all of them.
//! Run with `cargo test -p alignlab-core --test acceptance -- --nocapture` to
//! see the lines.

mod common;

use std::time::{Duration, Instant};

use alignlab::alignment::{
    check_aligned_objective, measure_delta_alignment, patch_constant, patch_reward, MeasureMode,
};
use alignlab::certify::{certify, required_samples, soundness_experiment, CertificationPlan, CertifyOutcome, Judge};
use alignlab::data::{corpus, empirical_risk, reduce_to_rl, LossFn, ReductionConfig};
use alignlab::envs::{build_driving, build_matrix, DrivingSpec, MatrixSpec};
use alignlab::learners::{exact_policy_search, ExactSearchOptions, PolicyClassSpec};
use alignlab::pomdp::random::{random_policy, random_spec, random_step_table, RandomShape};
use alignlab::pomdp::{
    enumerate_trajectories, expected_reward, state_marginal, EvalMode, SequenceReward,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Line {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn reduction_value_equality() -> Line {
    let start = Instant::now();
    let (d, class) = corpus();
    let loss = LossFn::zero_one();
    let red = reduce_to_rl(&d, &class, &loss, &ReductionConfig::default()).unwrap();
    let mut worst: f64 = 0.0;
    for h in &class.hypotheses {
        let v = expected_reward(&red.spec, red.policy(&h.id).unwrap(), &red.reward, EvalMode::Exact)
            .unwrap()
            .mean;
        let r = empirical_risk(&d, &h.id, &class, &loss).unwrap();
        worst = worst.max((v + r).abs());
    }
    let elapsed = start.elapsed();
    Line {
        name: "reduction value equals negative empirical risk",
        pass: class.hypotheses.len() == 8
            && d.m() == 6
            && worst <= 1e-12
            && elapsed < Duration::from_secs(1),
        detail: format!("8 hypotheses, max |V + risk| = {worst:.2e}, {elapsed:.2?}"),
    }
}

fn reduction_state_law() -> Line {
    let (d, class) = corpus();
    let red = reduce_to_rl(&d, &class, &LossFn::zero_one(), &ReductionConfig::default()).unwrap();
    let laws: Vec<_> = red
        .policies
        .iter()
        .map(|(_, p)| state_marginal(&enumerate_trajectories(&red.spec, p).unwrap()))
        .collect();
    let identical = laws.iter().all(|l| l == &laws[0]);
    Line {
        name: "reduction state law is policy independent",
        pass: laws.len() == 8 && identical,
        detail: format!("{} policies, {} state sequences, entrywise identical: {identical}", laws.len(), laws[0].len()),
    }
}

fn certification_sample_size() -> Line {
    let a = required_samples(0.1, 0.05).unwrap();
    let b = required_samples(0.5, (-1f64).exp()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut bad = 0;
    for _ in 0..1000 {
        let delta: f64 = rng.gen_range(1e-3..0.999);
        let nu: f64 = rng.gen_range(1e-6..0.999);
        let m = required_samples(delta, nu).unwrap();
        if (-delta * m as f64).exp() > nu * (1.0 + 1e-12) {
            bad += 1;
        }
    }
    Line {
        name: "certification sample size",
        pass: a == 30 && b == 2 && bad == 0,
        detail: format!("m(0.1, 0.05) = {a}, m(0.5, 1/e) = {b}, bound violations {bad}/1000"),
    }
}

fn certification_soundness() -> Line {
    let start = Instant::now();
    let r = soundness_experiment(0.2, 0.1, 0.05, 100_000, 2024).unwrap();
    let elapsed = start.elapsed();
    let rel = (r.empirical - r.closed_form).abs() / r.closed_form;
    Line {
        name: "certification soundness",
        pass: r.m == 30
            && rel <= 0.25
            && r.empirical <= 0.05
            && elapsed < Duration::from_secs(30),
        detail: format!(
            "false-pass {:.4e} vs (0.8)^30 = {:.4e} ({:.1}% off), {elapsed:.2?}",
            r.empirical,
            r.closed_form,
            100.0 * rel
        ),
    }
}

fn driving_demonstration() -> Line {
    let env = build_driving(&DrivingSpec::canonical()).unwrap();
    let class = PolicyClassSpec::AllDeterministic;
    let mass = |p| {
        measure_delta_alignment(&env.spec, p, &env.verifier, MeasureMode::Exact)
            .unwrap()
            .misalignment_mass
    };
    let base = exact_policy_search(&env.spec, &env.reward, &class, ExactSearchOptions::default()).unwrap();
    let base_mass = mass(&base.best_policy);
    let (eps, delta) = (0.05, 0.1);
    let c = patch_constant(&env.reward, eps, delta).unwrap();
    let patched = patch_reward(&env.reward, &env.verifier, c).unwrap();
    let best = exact_policy_search(&env.spec, &patched, &class, ExactSearchOptions::default()).unwrap();
    let patched_mass = mass(&best.best_policy);
    let policies = class.policies(&env.spec).unwrap();
    let before = check_aligned_objective(&env.spec, &env.reward, &policies, &env.verifier, eps, delta).unwrap();
    let after = check_aligned_objective(&env.spec, &patched, &policies, &env.verifier, eps, delta).unwrap();
    Line {
        name: "driving demonstration",
        pass: base_mass == 1.0 && patched_mass <= delta && !before.is_aligned() && after.is_aligned(),
        detail: format!(
            "{} policies; base optimum {} mass {base_mass}; c = {c}, patched optimum {} mass {patched_mass}",
            policies.len(),
            base.best_policy.id,
            best.best_policy.id
        ),
    }
}

fn patch_fuzz() -> Line {
    let cases = common::fuzz::patch_cases(100);
    let violations = cases
        .iter()
        .filter(|c| c.masses.iter().any(|m| *m > c.delta + 1e-12))
        .count();
    let skipped = cases.last().map(|c| c.seed + 1).unwrap_or(0) - cases.len() as u64;
    Line {
        name: "patch-bound fuzz",
        pass: cases.len() == 100 && violations == 0,
        detail: format!("{} instances ({skipped} skipped without an aligned policy), {violations} violations", cases.len()),
    }
}

fn matrix_demonstration() -> Line {
    let env = build_matrix(&MatrixSpec::canonical()).unwrap();
    let drift = env.drift_policy();
    let plan = CertificationPlan::new(0.1, 0.05, 7).unwrap();
    let passed = match certify(&env.buffered_env, &drift, &plan, Judge::Programmatic(&env.buffered_verifier)).unwrap() {
        CertifyOutcome::Certified(c) => c.passed(),
        CertifyOutcome::Pending { .. } => false,
    };
    let mass = measure_delta_alignment(env.buffered_env.real(), &drift, &env.full_verifier, MeasureMode::Exact)
        .unwrap()
        .misalignment_mass;
    Line {
        name: "matrix demonstration",
        pass: passed && mass >= 0.9,
        detail: format!("buffered certification (m = {}) passed: {passed}; full-state mass {mass:.5}", plan.m),
    }
}

fn simulation_fidelity() -> Line {
    let mut within = 0;
    for seed in 0..50u64 {
        let spec = random_spec(seed, RandomShape { sparsity: 0.3, ..RandomShape::default() });
        let p = random_policy(seed, &spec);
        let table = random_step_table(seed, &spec);
        let r = SequenceReward::new("avg", 0.0, 1.0, move |t| {
            t.steps.iter().map(|s| table[s.state][s.action]).sum::<f64>() / t.len() as f64
        })
        .unwrap();
        let exact = expected_reward(&spec, &p, &r, EvalMode::Exact).unwrap().mean;
        let mc = expected_reward(&spec, &p, &r, EvalMode::MonteCarlo { samples: 200_000, seed: seed + 1000 })
            .unwrap();
        if (mc.mean - exact).abs() <= 4.0 * mc.std_error {
            within += 1;
        }
    }
    Line {
        name: "simulation fidelity",
        pass: within >= 48,
        detail: format!("{within}/50 specs within 4 standard errors"),
    }
}

#[test]
fn acceptance() {
    let lines = [
        reduction_value_equality(),
        reduction_state_law(),
        certification_sample_size(),
        certification_soundness(),
        driving_demonstration(),
        patch_fuzz(),
        matrix_demonstration(),
        simulation_fidelity(),
    ];
    println!();
    for l in &lines {
        println!("{} {}: {}", if l.pass { "PASS" } else { "FAIL" }, l.name, l.detail);
    }
    let failed: Vec<_> = lines.iter().filter(|l| !l.pass).map(|l| l.name).collect();
    assert!(failed.is_empty(), "failed: {failed:?}");
}
