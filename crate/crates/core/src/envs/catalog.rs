//! Registry of the shipped environments. Each entry is rebuilt from a
//! manifest (kind plus instance parameters), so the manifest alone is enough
//! to reconstruct the spec, reward, verifier and named policies.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::cauldron::{build_cauldron, CauldronSpec, CARRY, FLOOD, IDLE};
use super::coin::build_coin;
use super::driving::{build_driving, DrivingSpec, FRAME_FIELDS};
use super::matrix::{build_matrix, MatrixSpec};
use crate::alignment::{BufferedEnv, Verifier};
use crate::error::{Error, Result};
use crate::pomdp::{Policy, SequenceReward, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvManifest {
    pub id: String,
    pub kind: String,
    pub params: Value,
    pub reward_id: String,
    /// First entry is the verifier used for programmatic certification.
    pub verifier_ids: Vec<String>,
    pub frame_fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CoinParams {
    horizon: usize,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub manifest: EnvManifest,
    pub buffered_env: BufferedEnv,
    /// Judges simulator sequences.
    pub verifier: Verifier,
    pub reward: SequenceReward,
    pub policies: Vec<Policy>,
    frames: Vec<Value>,
}

impl CatalogEntry {
    pub fn id(&self) -> &str {
        &self.manifest.id
    }

    pub fn policy(&self, id: &str) -> Option<&Policy> {
        self.policies.iter().find(|p| p.id == id)
    }

    pub fn frame(&self, buffered_state: usize) -> &Value {
        &self.frames[buffered_state]
    }

    /// Step-by-step view of a simulator trajectory for a human judge.
    pub fn render(&self, traj: &Trajectory) -> Vec<Value> {
        let spec = self.buffered_env.buffered();
        traj.steps
            .iter()
            .enumerate()
            .map(|(t, s)| {
                json!({
                    "t": t,
                    "state": spec.states()[s.state],
                    "obs": spec.observations()[s.obs],
                    "action": spec.actions()[s.action],
                    "frame": self.frames[s.state],
                })
            })
            .collect()
    }
}

fn params<T: serde::de::DeserializeOwned>(kind: &str, v: &Value) -> Result<T> {
    serde_json::from_value(v.clone())
        .map_err(|e| Error::invalid(format!("bad {kind} parameters: {e}")))
}

/// Builds an entry from its manifest. The reward and verifier ids in the
/// manifest are checked against what the builder produces.
pub fn build_entry(manifest: &EnvManifest) -> Result<CatalogEntry> {
    let entry = build_kind(&manifest.id, &manifest.kind, &manifest.params)?;
    if entry.manifest.reward_id != manifest.reward_id
        || entry.manifest.verifier_ids != manifest.verifier_ids
    {
        return Err(Error::invalid(format!(
            "manifest `{}` names reward `{}` / verifiers {:?}, but kind `{}` provides `{}` / {:?}",
            manifest.id,
            manifest.reward_id,
            manifest.verifier_ids,
            manifest.kind,
            entry.manifest.reward_id,
            entry.manifest.verifier_ids
        )));
    }
    Ok(entry)
}

type Parts = (
    BufferedEnv,
    Verifier,
    SequenceReward,
    Vec<Policy>,
    Vec<Value>,
    Vec<String>,
    Vec<String>,
);

pub fn build_kind(id: &str, kind: &str, raw: &Value) -> Result<CatalogEntry> {
    let (buffered_env, verifier, reward, policies, frames, extra_verifiers, fields): Parts = match kind {
        "driving" => {
            let p: DrivingSpec = params(kind, raw)?;
            let env = build_driving(&p)?;
            let frames = (0..env.spec.n_states()).map(|s| env.model.frame(s)).collect();
            let policies = vec![env.lockout_policy(), env.serving_policy(), env.parked_policy()];
            (
                BufferedEnv::identity(id, env.spec.with_id(id)),
                env.verifier,
                env.reward,
                policies,
                frames,
                vec![],
                FRAME_FIELDS.iter().map(|s| s.to_string()).collect(),
            )
        }
        "cauldron" => {
            let p: CauldronSpec = params(kind, raw)?;
            let env = build_cauldron(&p)?;
            let frames = (0..env.spec.n_states()).map(|s| env.frame(s)).collect();
            let policies = vec![
                env.constant_policy("flood", FLOOD),
                env.constant_policy("carry", CARRY),
                env.constant_policy("idle", IDLE),
            ];
            (
                BufferedEnv::identity(id, env.spec.with_id(id)),
                env.verifier,
                env.reward,
                policies,
                frames,
                vec![],
                vec!["fill".into(), "capacity".into(), "spilled".into()],
            )
        }
        "matrix" => {
            let p: MatrixSpec = params(kind, raw)?;
            let env = build_matrix(&p)?;
            let frames = (0..p.visible_states.len()).map(|s| env.frame(s)).collect();
            let drift = env.drift_policy();
            let other = (0..p.actions.len())
                .find(|&a| a != p.drift_action)
                .expect("validated: at least two actions");
            let steady = env.always("steady", other);
            let be = env.buffered_env;
            let buffered_env = BufferedEnv::new(
                id,
                be.real().clone(),
                be.buffered().clone().with_id(id),
                be.mu().to_vec(),
            )?;
            (
                buffered_env,
                env.buffered_verifier,
                env.reward,
                vec![drift, steady],
                frames,
                vec![env.full_verifier.id().to_string()],
                vec!["mood".into(), "happiness".into()],
            )
        }
        "coin" => {
            let p: CoinParams = params(kind, raw)?;
            let env = build_coin(p.horizon)?;
            let spec = env.buffered_env.buffered().clone().with_id(id);
            let frames = spec.states().iter().map(|s| json!({ "side": s })).collect();
            let reward = SequenceReward::constant(0.0);
            (
                BufferedEnv::identity(id, spec),
                env.verifier,
                reward,
                vec![env.policy],
                frames,
                vec![],
                vec!["side".into()],
            )
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown environment kind `{other}` (expected driving, cauldron, matrix or coin)"
            )))
        }
    };
    let mut verifier_ids = vec![verifier.id().to_string()];
    verifier_ids.extend(extra_verifiers);
    Ok(CatalogEntry {
        manifest: EnvManifest {
            id: id.to_string(),
            kind: kind.to_string(),
            params: raw.clone(),
            reward_id: reward.id().to_string(),
            verifier_ids,
            frame_fields: fields,
        },
        buffered_env,
        verifier,
        reward,
        policies,
        frames,
    })
}

/// Manifests of the canonical instances.
pub fn canonical_manifests() -> Vec<(String, String, Value)> {
    vec![
        ("driving".into(), "driving".into(), json!(DrivingSpec::canonical())),
        ("cauldron".into(), "cauldron".into(), json!(CauldronSpec::canonical())),
        ("matrix".into(), "matrix".into(), json!(MatrixSpec::canonical())),
        ("coin".into(), "coin".into(), json!(CoinParams { horizon: 3 })),
    ]
}

/// The canonical instance of every environment kind.
pub fn canonical_catalog() -> Result<Vec<CatalogEntry>> {
    canonical_manifests()
        .into_iter()
        .map(|(id, kind, params)| build_kind(&id, &kind, &params))
        .collect()
}
