mod demo;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use alignlab::certify::{certify, soundness_experiment, CertificationPlan, CertifyOutcome, Judge};
use alignlab::data::{
    corpus, reduce_to_rl, risk_vector, Dataset, HypothesisClass, LossFn, ReductionConfig,
};
use alignlab::envs::canonical_catalog;
use alignlab::pomdp::{enumerate_trajectories, expected_reward, state_marginal, EvalMode};
use alignlab_service::{CreateSession, Store};

pub const EXIT_MISMATCH: u8 = 2;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_DATA: u8 = 65;

#[derive(Debug, Parser)]
#[command(name = "alignlab", version, about = "Alignment verification testbed")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reproduce one of the worked demonstrations.
    Demo(DemoArgs),
    /// Certify a catalog policy by sampling.
    Certify(CertifyArgs),
    /// Estimate the false-pass rate of the certification procedure.
    Soundness(SoundnessArgs),
    /// Reduce a supervised-learning problem to RL and check the equivalence.
    Reduce(ReduceArgs),
    /// Serve the validator HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DemoArgs {
    /// driving, cauldron or matrix
    pub name: String,
    /// Apply the reward patch before searching.
    #[arg(long)]
    pub patched: bool,
    /// Patch constant; defaults to (r_max - r_min + eps) / delta.
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Mode {
    Programmatic,
    Serve,
}

#[derive(Debug, Args, Serialize)]
struct CertifyArgs {
    #[arg(long)]
    env: String,
    #[arg(long)]
    policy: String,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.05)]
    nu: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Programmatic)]
    mode: Mode,
    /// Session storage for serve mode.
    #[arg(long, default_value = "alignlab-data")]
    data_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SoundnessArgs {
    #[arg(long)]
    true_mass: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.05)]
    nu: f64,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ReduceArgs {
    /// Dataset JSON; the bundled corpus when omitted.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Hypothesis class JSON; the bundled corpus when omitted.
    #[arg(long)]
    class: Option<PathBuf>,
    /// zero_one or absolute_error
    #[arg(long, default_value = "zero_one")]
    loss: String,
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    /// Directory for the reduction spec and policy manifest.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    #[arg(long, default_value = "alignlab-data")]
    data_dir: PathBuf,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(m: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: m.into() }
    }
    pub fn data(m: impl Into<String>) -> Self {
        Failure { code: EXIT_DATA, message: m.into() }
    }
}

impl From<alignlab::Error> for Failure {
    fn from(e: alignlab::Error) -> Self {
        Failure::data(e.to_string())
    }
}

impl From<alignlab_service::ApiError> for Failure {
    fn from(e: alignlab_service::ApiError) -> Self {
        Failure::data(e.message)
    }
}

/// Writes `value` to `out`, or stdout when absent.
pub fn emit(value: &Value, out: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    match out {
        Some(p) => std::fs::write(p, text + "\n")
            .map_err(|e| Failure::data(format!("cannot write {}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn run_certify(args: &CertifyArgs) -> Result<u8, Failure> {
    let catalog = canonical_catalog()?;
    let entry = catalog
        .iter()
        .find(|e| e.id() == args.env)
        .ok_or_else(|| Failure::data(format!("unknown environment `{}`", args.env)))?;
    let policy = entry.policy(&args.policy).ok_or_else(|| {
        Failure::data(format!("unknown policy `{}` for `{}`", args.policy, args.env))
    })?;
    match args.mode {
        Mode::Programmatic => {
            let plan = CertificationPlan::new(args.delta, args.nu, args.seed)?;
            let cert = match certify(&entry.buffered_env, policy, &plan, Judge::Programmatic(&entry.verifier))? {
                CertifyOutcome::Certified(c) => c,
                CertifyOutcome::Pending { .. } => unreachable!("programmatic runs close"),
            };
            emit(
                &json!({ "args": args, "verifier": entry.verifier.id(), "certificate": cert }),
                args.out.as_deref(),
            )?;
            Ok(0)
        }
        Mode::Serve => serve_session(args, catalog),
    }
}

/// Opens one session, serves the API until a human closes it, then emits
/// the certificate.
fn serve_session(args: &CertifyArgs, catalog: Vec<alignlab::envs::CatalogEntry>) -> Result<u8, Failure> {
    let store = Arc::new(Store::open(&args.data_dir, catalog)?);
    let rec = store.create(&CreateSession {
        env_id: args.env.clone(),
        policy_id: args.policy.clone(),
        delta: args.delta,
        nu: args.nu,
        seed: args.seed,
    })?;
    eprintln!(
        "session {} open at http://{}/sessions/{} ({} sequences to judge)",
        rec.id, args.addr, rec.id, rec.plan.m
    );
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::data(e.to_string()))?;
    let cert = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(args.addr)
            .await
            .map_err(|e| Failure::usage(format!("cannot bind {}: {e}", args.addr)))?;
        let app = alignlab_service::router(store.clone());
        let server = tokio::spawn(alignlab_service::serve_with(listener, app));
        loop {
            tokio::time::sleep(Duration::from_millis(200)).await;
            if let Some(c) = store.with_session(&rec.id, |s| s.certificate())? {
                server.abort();
                return Ok::<_, Failure>(c);
            }
        }
    })?;
    emit(&json!({ "args": args, "session": rec.id, "certificate": cert }), args.out.as_deref())?;
    Ok(0)
}

fn run_soundness(args: &SoundnessArgs) -> Result<u8, Failure> {
    let r = soundness_experiment(args.true_mass, args.delta, args.nu, args.trials, args.seed)?;
    emit(
        &json!({
            "args": args,
            "m": r.m,
            "passes": r.passes,
            "empirical": r.empirical,
            "closed_form": r.closed_form,
            "true_mass_bound": r.true_mass_bound,
            "bound": r.bound,
        }),
        args.out.as_deref(),
    )?;
    Ok(0)
}

fn run_reduce(args: &ReduceArgs) -> Result<u8, Failure> {
    let (data, class): (Dataset, HypothesisClass) = match (&args.dataset, &args.class) {
        (None, None) => corpus(),
        (Some(d), Some(c)) => (read_json(d)?, read_json(c)?),
        _ => return Err(Failure::usage("--dataset and --class go together")),
    };
    let loss = LossFn::by_name(&args.loss, data.labels.len())?;
    let cfg = ReductionConfig {
        horizon: args.horizon,
        ..ReductionConfig::default()
    };
    let red = reduce_to_rl(&data, &class, &loss, &cfg)?;
    let risks = risk_vector(&data, &class, &loss)?;
    let mut rows = Vec::new();
    let mut all_equal = true;
    let mut laws = Vec::new();
    for (h, risk) in class.hypotheses.iter().zip(&risks) {
        let policy = red.policy(&h.id).expect("one policy per hypothesis");
        let value = expected_reward(&red.spec, policy, &red.reward, EvalMode::Exact)?.mean;
        let equal = (value + risk).abs() <= 1e-12;
        all_equal &= equal;
        laws.push(state_marginal(&enumerate_trajectories(&red.spec, policy)?));
        rows.push(json!({ "hypothesis": h.id, "empirical_risk": risk, "value": value, "equal": equal }));
    }
    let invariant = laws.iter().all(|l| l == &laws[0]);
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Failure::data(e.to_string()))?;
        std::fs::write(dir.join("reduction_spec.json"), red.spec.to_json()?)
            .map_err(|e| Failure::data(e.to_string()))?;
        let manifest = serde_json::to_string_pretty(&red.policy_manifest()).expect("manifest serializes");
        std::fs::write(dir.join("policies.json"), manifest).map_err(|e| Failure::data(e.to_string()))?;
    }
    let pass = all_equal && invariant;
    emit(
        &json!({
            "args": args,
            "spec_id": red.spec.id(),
            "hypotheses": rows,
            "value_equals_negative_risk": all_equal,
            "state_law_invariant": invariant,
            "pass": pass,
        }),
        args.out.as_deref(),
    )?;
    Ok(if pass { 0 } else { EXIT_MISMATCH })
}

fn run_serve(args: &ServeArgs) -> Result<u8, Failure> {
    let store = Arc::new(Store::open(&args.data_dir, canonical_catalog()?)?);
    eprintln!("serving on http://{} (data in {})", args.addr, args.data_dir.display());
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure::data(e.to_string()))?;
    rt.block_on(alignlab_service::serve(args.addr, store))
        .map_err(|e| Failure::usage(format!("cannot serve on {}: {e}", args.addr)))?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Demo(a) => demo::run(a),
        Command::Certify(a) => run_certify(a),
        Command::Soundness(a) => run_soundness(a),
        Command::Reduce(a) => run_reduce(a),
        Command::Serve(a) => run_serve(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
