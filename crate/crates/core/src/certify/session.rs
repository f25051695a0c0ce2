use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::certificate::{Certificate, Outcome};
use super::log::{parse_log, Judgment, JudgmentLog, JudgmentSource, Verdict};
use super::plan::CertificationPlan;
use crate::alignment::{BufferedEnv, Verifier};
use crate::error::{ensure, Result};
use crate::pomdp::{rng_from_seed, rollout_seed, sample_with, Policy, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum SessionStatus {
    Open,
    Passed,
    Failed { index: u64 },
}

impl SessionStatus {
    pub fn is_open(&self) -> bool {
        matches!(self, SessionStatus::Open)
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session is closed ({0:?})")]
    Closed(SessionStatus),
    #[error("sequence {got} was already judged")]
    Duplicate { got: u64 },
    #[error("out-of-order judgment: expected sequence {expected}, got {got}")]
    OutOfOrder { expected: u64, got: u64 },
    #[error("judgment source {0:?} does not belong to this session")]
    ForeignSource(JudgmentSource),
    #[error(transparent)]
    Storage(#[from] crate::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum NextSequence {
    Sequence { index: u64, trajectory: Trajectory },
    Exhausted,
}

/// One run of the certification procedure: `m` simulator trajectories are
/// drawn up front from the plan seed, then judged strictly in index order.
/// The first misaligned verdict closes the session.
#[derive(Debug)]
pub struct Session {
    id: String,
    env_id: String,
    policy_id: String,
    plan: CertificationPlan,
    sequences: Vec<Trajectory>,
    log: JudgmentLog,
    status: SessionStatus,
    created_at: DateTime<Utc>,
    closed_at: Option<DateTime<Utc>>,
}

/// Trajectory `i` of a certification run.
pub fn certification_sequences(
    buf: &BufferedEnv,
    policy: &Policy,
    plan: &CertificationPlan,
) -> Result<Vec<Trajectory>> {
    plan.validate()?;
    policy.validate_for(buf.buffered())?;
    Ok((0..plan.m)
        .map(|i| {
            let mut rng = rng_from_seed(rollout_seed(plan.seed, i));
            sample_with(buf.buffered(), policy, &mut rng)
        })
        .collect())
}

/// Opens a session with a fresh random id.
pub fn open_session(buf: &BufferedEnv, policy: &Policy, plan: CertificationPlan) -> Result<Session> {
    Session::open(uuid::Uuid::new_v4().to_string(), buf, policy, plan)
}

impl Session {
    pub fn open(
        id: impl Into<String>,
        buf: &BufferedEnv,
        policy: &Policy,
        plan: CertificationPlan,
    ) -> Result<Self> {
        let id = id.into();
        ensure!(!id.is_empty(), "session id must not be empty");
        Ok(Session {
            sequences: certification_sequences(buf, policy, &plan)?,
            id,
            env_id: buf.id.clone(),
            policy_id: policy.id.clone(),
            plan,
            log: JudgmentLog::new(),
            status: SessionStatus::Open,
            created_at: Utc::now(),
            closed_at: None,
        })
    }

    /// Rebuilds a session from a persisted log. The sequences are re-drawn from
    /// the plan seed and the logged judgments replayed; future judgments are
    /// appended to `log_path`.
    pub fn restore(
        id: impl Into<String>,
        buf: &BufferedEnv,
        policy: &Policy,
        plan: CertificationPlan,
        created_at: DateTime<Utc>,
        log_path: &Path,
    ) -> Result<Self> {
        let mut session = Session::open(id, buf, policy, plan)?;
        session.created_at = created_at;
        let text = if log_path.exists() {
            std::fs::read_to_string(log_path)?
        } else {
            String::new()
        };
        for j in parse_log(&text)? {
            session
                .submit_judgment(j)
                .map_err(|e| crate::Error::invalid(format!("log replay failed: {e}")))?;
        }
        session.log.attach_file(log_path)?;
        Ok(session)
    }

    /// Mirrors all future judgments to `path`.
    pub fn persist_to(&mut self, path: &Path) -> Result<()> {
        ensure!(
            self.log.is_empty(),
            "attach the log file before any judgment is recorded"
        );
        self.log.attach_file(path)
    }

    pub fn id(&self) -> &str {
        &self.id
    }
    pub fn env_id(&self) -> &str {
        &self.env_id
    }
    pub fn policy_id(&self) -> &str {
        &self.policy_id
    }
    pub fn plan(&self) -> &CertificationPlan {
        &self.plan
    }
    pub fn status(&self) -> SessionStatus {
        self.status
    }
    pub fn created_at(&self) -> DateTime<Utc> {
        self.created_at
    }
    pub fn closed_at(&self) -> Option<DateTime<Utc>> {
        self.closed_at
    }
    pub fn judged(&self) -> u64 {
        self.log.len() as u64
    }
    pub fn log(&self) -> &JudgmentLog {
        &self.log
    }
    pub fn sequences(&self) -> &[Trajectory] {
        &self.sequences
    }

    /// The lowest unjudged sequence, or `Exhausted` once the session closed.
    pub fn next_sequence(&self) -> NextSequence {
        if !self.status.is_open() {
            return NextSequence::Exhausted;
        }
        let index = self.judged();
        match self.sequences.get(index as usize) {
            Some(t) => NextSequence::Sequence {
                index,
                trajectory: t.clone(),
            },
            None => NextSequence::Exhausted,
        }
    }

    pub fn submit_judgment(&mut self, judgment: Judgment) -> Result<SessionStatus, SessionError> {
        if !self.status.is_open() {
            return Err(SessionError::Closed(self.status));
        }
        if let JudgmentSource::Human(sid) = &judgment.source {
            if *sid != self.id {
                return Err(SessionError::ForeignSource(judgment.source.clone()));
            }
        }
        let expected = self.judged();
        if judgment.sequence_index < expected {
            return Err(SessionError::Duplicate {
                got: judgment.sequence_index,
            });
        }
        if judgment.sequence_index > expected {
            return Err(SessionError::OutOfOrder {
                expected,
                got: judgment.sequence_index,
            });
        }
        let index = judgment.sequence_index;
        let verdict = judgment.verdict;
        let at = judgment.timestamp;
        self.log.append(judgment)?;
        if verdict == Verdict::Misaligned {
            self.status = SessionStatus::Failed { index };
        } else if self.judged() == self.plan.m {
            self.status = SessionStatus::Passed;
        }
        if !self.status.is_open() {
            self.closed_at = Some(at);
        }
        Ok(self.status)
    }

    /// Records a human verdict stamped now.
    pub fn submit_verdict(&mut self, index: u64, verdict: Verdict) -> Result<SessionStatus, SessionError> {
        let source = JudgmentSource::Human(self.id.clone());
        self.submit_judgment(Judgment {
            sequence_index: index,
            verdict,
            source,
            timestamp: Utc::now(),
        })
    }

    /// Judges every remaining sequence with `verifier` until the session closes.
    pub fn run_programmatic(&mut self, verifier: &Verifier) -> Result<SessionStatus> {
        while let NextSequence::Sequence { index, trajectory } = self.next_sequence() {
            let verdict = if verifier.is_aligned(&trajectory.states()) {
                Verdict::Aligned
            } else {
                Verdict::Misaligned
            };
            self.submit_judgment(Judgment {
                sequence_index: index,
                verdict,
                source: JudgmentSource::Programmatic(verifier.id().to_string()),
                timestamp: Utc::now(),
            })
            .map_err(|e| crate::Error::invalid(e.to_string()))?;
        }
        Ok(self.status)
    }

    /// The certificate, once the session has closed.
    pub fn certificate(&self) -> Option<Certificate> {
        let outcome = match self.status {
            SessionStatus::Open => return None,
            SessionStatus::Passed => Outcome::Pass,
            SessionStatus::Failed { index } => Outcome::Fail { index },
        };
        Some(Certificate::new(
            self.env_id.clone(),
            self.policy_id.clone(),
            self.plan,
            outcome,
            &self.log,
            self.closed_at.expect("closed session has a close time"),
        ))
    }
}
