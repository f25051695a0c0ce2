use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use alignlab::certify::{
    open_session, Certificate, CertificationPlan, Session, SessionStatus, Verdict,
};
use alignlab::envs::CatalogEntry;

use crate::error::ApiError;

const INDEX_FILE: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub id: String,
    pub env_id: String,
    pub policy_id: String,
    pub plan: CertificationPlan,
    #[serde(flatten)]
    pub status: SessionStatus,
    pub judged: u64,
    pub created_at: DateTime<Utc>,
    pub closed_at: Option<DateTime<Utc>>,
    /// Judgment log file name, relative to the data directory.
    pub log_path: String,
    /// Digest of the judgment log as of the last judgment.
    pub digest: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub env_id: String,
    pub policy_id: String,
    pub delta: f64,
    pub nu: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgmentRequest {
    pub sequence_index: u64,
    pub verdict: Verdict,
}

/// Catalog plus all sessions, mirrored to a data directory.
pub struct Store {
    dir: PathBuf,
    catalog: Vec<CatalogEntry>,
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
    /// Snapshot served to readers; updated after every write.
    records: Mutex<BTreeMap<String, SessionRecord>>,
}

fn record_of(s: &Session) -> SessionRecord {
    SessionRecord {
        id: s.id().to_string(),
        env_id: s.env_id().to_string(),
        policy_id: s.policy_id().to_string(),
        plan: *s.plan(),
        status: s.status(),
        judged: s.judged(),
        created_at: s.created_at(),
        closed_at: s.closed_at(),
        log_path: format!("{}.jsonl", s.id()),
        digest: s.log().digest(),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, path)
}

impl Store {
    /// Opens (or creates) `dir` and restores every session listed in its index.
    pub fn open(dir: impl Into<PathBuf>, catalog: Vec<CatalogEntry>) -> Result<Self, ApiError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| ApiError::storage(e.to_string()))?;
        let store = Store {
            dir,
            catalog,
            sessions: RwLock::new(BTreeMap::new()),
            records: Mutex::new(BTreeMap::new()),
        };
        let index = store.dir.join(INDEX_FILE);
        if index.exists() {
            let text = std::fs::read_to_string(&index).map_err(|e| ApiError::storage(e.to_string()))?;
            let saved: Vec<SessionRecord> = serde_json::from_str(&text)
                .map_err(|e| ApiError::storage(format!("corrupt {INDEX_FILE}: {e}")))?;
            for rec in saved {
                let (entry, policy) = store.resolve(&rec.env_id, &rec.policy_id)?;
                let session = Session::restore(
                    rec.id.clone(),
                    &entry.buffered_env,
                    policy,
                    rec.plan,
                    rec.created_at,
                    &store.dir.join(&rec.log_path),
                )?;
                store.install(session)?;
            }
        }
        Ok(store)
    }

    pub fn data_dir(&self) -> &Path {
        &self.dir
    }

    pub fn catalog(&self) -> &[CatalogEntry] {
        &self.catalog
    }

    pub fn entry(&self, env_id: &str) -> Result<&CatalogEntry, ApiError> {
        self.catalog
            .iter()
            .find(|e| e.id() == env_id)
            .ok_or_else(|| ApiError::not_found(format!("unknown environment `{env_id}`")))
    }

    fn resolve(
        &self,
        env_id: &str,
        policy_id: &str,
    ) -> Result<(&CatalogEntry, &alignlab::pomdp::Policy), ApiError> {
        let entry = self.entry(env_id)?;
        let policy = entry.policy(policy_id).ok_or_else(|| {
            ApiError::not_found(format!("unknown policy `{policy_id}` for environment `{env_id}`"))
        })?;
        Ok((entry, policy))
    }

    fn install(&self, session: Session) -> Result<SessionRecord, ApiError> {
        let rec = record_of(&session);
        self.sessions
            .write()
            .expect("sessions lock")
            .insert(rec.id.clone(), Arc::new(Mutex::new(session)));
        self.publish(rec.clone())?;
        Ok(rec)
    }

    /// Updates the snapshot and rewrites the index.
    fn publish(&self, rec: SessionRecord) -> Result<(), ApiError> {
        let mut records = self.records.lock().expect("records lock");
        records.insert(rec.id.clone(), rec);
        let list: Vec<&SessionRecord> = records.values().collect();
        let text = serde_json::to_vec_pretty(&list).expect("records serialize");
        write_atomic(&self.dir.join(INDEX_FILE), &text).map_err(|e| ApiError::storage(e.to_string()))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session `{id}`")))
    }

    pub fn create(&self, req: &CreateSession) -> Result<SessionRecord, ApiError> {
        let (entry, policy) = self.resolve(&req.env_id, &req.policy_id)?;
        let plan = CertificationPlan::new(req.delta, req.nu, req.seed)?;
        let mut session = open_session(&entry.buffered_env, policy, plan)?;
        session.persist_to(&self.dir.join(format!("{}.jsonl", session.id())))?;
        self.install(session)
    }

    pub fn record(&self, id: &str) -> Result<SessionRecord, ApiError> {
        self.records
            .lock()
            .expect("records lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("unknown session `{id}`")))
    }

    pub fn records(&self) -> Vec<SessionRecord> {
        self.records.lock().expect("records lock").values().cloned().collect()
    }

    /// Runs `f` with the session locked for reading.
    pub fn with_session<T>(&self, id: &str, f: impl FnOnce(&Session) -> T) -> Result<T, ApiError> {
        let s = self.session(id)?;
        let guard = s.lock().expect("session lock");
        Ok(f(&guard))
    }

    /// Records a verdict. Judgments on one session are serialized by its lock.
    pub fn judge(&self, id: &str, req: &JudgmentRequest) -> Result<SessionRecord, ApiError> {
        let s = self.session(id)?;
        let mut session = s.lock().expect("session lock");
        session.submit_verdict(req.sequence_index, req.verdict)?;
        if let Some(cert) = session.certificate() {
            self.write_certificate(session.id(), &cert)?;
        }
        let rec = record_of(&session);
        self.publish(rec.clone())?;
        Ok(rec)
    }

    fn write_certificate(&self, id: &str, cert: &Certificate) -> Result<(), ApiError> {
        let text = serde_json::to_vec_pretty(cert).expect("certificate serializes");
        write_atomic(&self.dir.join(format!("{id}.certificate.json")), &text)
            .map_err(|e| ApiError::storage(e.to_string()))
    }
}
