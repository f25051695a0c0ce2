use serde_json::{json, Value};

use alignlab::alignment::{
    check_aligned_objective, measure_delta_alignment, patch_constant, patch_reward, MeasureMode,
    ObjectiveVerdict, Verifier,
};
use alignlab::envs::{build_cauldron, build_driving, build_matrix, CauldronSpec, DrivingSpec, MatrixSpec};
use alignlab::learners::{exact_policy_search, ExactSearchOptions, PolicyClassSpec};
use alignlab::pomdp::{Policy, PomdpSpec, SequenceReward};

use crate::{emit, DemoArgs, Failure, EXIT_MISMATCH};

fn verdict_name(aligned: bool) -> &'static str {
    if aligned {
        "aligned"
    } else {
        "misaligned"
    }
}

fn mass(spec: &PomdpSpec, p: &Policy, v: &Verifier) -> Result<f64, Failure> {
    Ok(measure_delta_alignment(spec, p, v, MeasureMode::Exact)?.misalignment_mass)
}

fn objective(
    args: &DemoArgs,
    base: &SequenceReward,
    verifier: &Verifier,
) -> Result<(SequenceReward, Option<f64>), Failure> {
    if !args.patched {
        return Ok((base.clone(), None));
    }
    let c = match args.c {
        Some(c) => c,
        None => patch_constant(base, args.eps, args.delta)?,
    };
    Ok((patch_reward(base, verifier, c)?, Some(c)))
}

/// Driving and cauldron: the verifier sees the simulator state directly.
fn direct(args: &DemoArgs, spec: &PomdpSpec, base: &SequenceReward, verifier: &Verifier) -> Result<(Value, bool), Failure> {
    let (reward, c) = objective(args, base, verifier)?;
    let class = PolicyClassSpec::AllDeterministic;
    let best = exact_policy_search(spec, &reward, &class, ExactSearchOptions::default())?;
    let best_mass = mass(spec, &best.best_policy, verifier)?;
    let policies = class.policies(spec)?;
    let check = check_aligned_objective(spec, &reward, &policies, verifier, args.eps, args.delta)?;
    let aligned = check.is_aligned();
    let expected = args.patched;
    let mut report = json!({
        "env": args.name,
        "best_policy": best.best_policy,
        "value": best.best_value,
        "misalignment_mass": best_mass,
        "verdict": verdict_name(aligned),
        "expected_verdict": verdict_name(expected),
        "class_size": policies.len(),
        "reward_id": reward.id(),
        "verifier_id": verifier.id(),
    });
    if let Some(c) = c {
        report["c"] = json!(c);
    }
    match check {
        ObjectiveVerdict::Misaligned { witness, witness_value, misalignment_mass, maximizers } => {
            report["maximizers"] = json!(maximizers);
            report["witness"] = json!({ "policy": witness.id, "value": witness_value, "misalignment_mass": misalignment_mass });
        }
        ObjectiveVerdict::Aligned { maximizers, worst_mass } => {
            report["maximizers"] = json!(maximizers);
            report["worst_mass"] = json!(worst_mass);
        }
    }
    Ok((report, aligned == expected))
}

/// Matrix: search and patch inside the simulator, then measure the chosen
/// policy against the latent state it cannot see.
fn matrix(args: &DemoArgs) -> Result<(Value, bool), Failure> {
    let env = build_matrix(&MatrixSpec::canonical())?;
    let sim = env.buffered_env.buffered();
    let (reward, c) = objective(args, &env.reward, &env.buffered_verifier)?;
    let best = exact_policy_search(sim, &reward, &PolicyClassSpec::AllDeterministic, ExactSearchOptions::default())?;
    let buffered_mass = mass(sim, &best.best_policy, &env.buffered_verifier)?;
    let full_mass = mass(env.buffered_env.real(), &best.best_policy, &env.full_verifier)?;
    let aligned = full_mass <= args.delta;
    let buffered_aligned = buffered_mass <= args.delta;
    let mut report = json!({
        "env": args.name,
        "best_policy": best.best_policy,
        "value": best.best_value,
        "misalignment_mass": full_mass,
        "verdict": verdict_name(aligned),
        "expected_verdict": "misaligned",
        "buffered_misalignment_mass": buffered_mass,
        "buffered_verdict": verdict_name(buffered_aligned),
        "reward_id": reward.id(),
        "verifier_id": env.full_verifier.id(),
        "buffered_verifier_id": env.buffered_verifier.id(),
    });
    if let Some(c) = c {
        report["c"] = json!(c);
    }
    Ok((report, !aligned && buffered_aligned))
}

pub fn run(args: &DemoArgs) -> Result<u8, Failure> {
    if !(args.delta > 0.0 && args.delta <= 1.0) || !(args.eps >= 0.0 && args.eps.is_finite()) {
        return Err(Failure::usage("--delta must lie in (0, 1] and --eps must be non-negative"));
    }
    let (mut report, reproduced) = match args.name.as_str() {
        "driving" => {
            let env = build_driving(&DrivingSpec::canonical())?;
            direct(args, &env.spec, &env.reward, &env.verifier)?
        }
        "cauldron" => {
            let env = build_cauldron(&CauldronSpec::canonical())?;
            direct(args, &env.spec, &env.reward, &env.verifier)?
        }
        "matrix" => matrix(args)?,
        other => {
            return Err(Failure::usage(format!(
                "unknown demo `{other}`; expected driving, cauldron or matrix"
            )))
        }
    };
    report["args"] = json!(args);
    report["reproduced"] = json!(reproduced);
    emit(&report, args.out.as_deref())?;
    Ok(if reproduced { 0 } else { EXIT_MISMATCH })
}
