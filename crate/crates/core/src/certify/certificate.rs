use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::log::{verdict_digest, JudgmentLog};
use super::plan::CertificationPlan;
use super::session::{open_session, Session};
use crate::alignment::{BufferedEnv, Verifier};
use crate::error::{ensure, Result};
use crate::pomdp::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "result")]
pub enum Outcome {
    Pass,
    /// First misaligned sequence index.
    Fail { index: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub tool_version: String,
    pub env_id: String,
    pub policy_id: String,
    pub plan: CertificationPlan,
    pub outcome: Outcome,
    pub judgments: u64,
    /// SHA-256 of the verdict sequence alone.
    pub verdict_digest: String,
    /// SHA-256 of the persisted JSONL judgment log.
    pub judgment_digest: String,
    pub claim: String,
    pub issued_at: DateTime<Utc>,
}

impl Certificate {
    pub(crate) fn new(
        env_id: String,
        policy_id: String,
        plan: CertificationPlan,
        outcome: Outcome,
        log: &JudgmentLog,
        issued_at: DateTime<Utc>,
    ) -> Self {
        let claim = match outcome {
            Outcome::Pass => format!(
                "with probability >= 1 - {} the buffered sequence distribution of policy `{}` in `{}` is {}-aligned",
                plan.nu, policy_id, env_id, plan.delta
            ),
            Outcome::Fail { index } => format!(
                "sequence {index} was judged misaligned; no alignment claim is made for policy `{policy_id}` in `{env_id}`"
            ),
        };
        Certificate {
            tool_version: crate::TOOL_VERSION.to_string(),
            env_id,
            policy_id,
            plan,
            outcome,
            judgments: log.len() as u64,
            verdict_digest: verdict_digest(log.judgments()),
            judgment_digest: log.digest(),
            claim,
            issued_at,
        }
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    /// JSON view without the fields that depend on wall-clock time or on who
    /// issued the verdicts (`issued_at`, `judgment_digest`). Two runs over the
    /// same plan, policy and environment with equal verdicts agree on it.
    pub fn comparable(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("certificate serializes");
        let obj = v.as_object_mut().expect("object");
        obj.remove("issued_at");
        obj.remove("judgment_digest");
        v
    }
}

/// Who supplies the verdicts.
pub enum Judge<'a> {
    Programmatic(&'a Verifier),
    Session(&'a Session),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CertifyOutcome {
    Certified(Certificate),
    /// A human session that has not yet closed.
    Pending { judged: u64, required: u64 },
}

/// Runs the sampling certification of `policy` in the simulator of `buf`.
pub fn certify(
    buf: &BufferedEnv,
    policy: &Policy,
    plan: &CertificationPlan,
    judge: Judge<'_>,
) -> Result<CertifyOutcome> {
    plan.validate()?;
    match judge {
        Judge::Programmatic(verifier) => {
            let mut session = open_session(buf, policy, *plan)?;
            session.run_programmatic(verifier)?;
            Ok(CertifyOutcome::Certified(
                session.certificate().expect("programmatic run closes the session"),
            ))
        }
        Judge::Session(session) => {
            ensure!(
                session.env_id() == buf.id,
                "session belongs to environment `{}`, not `{}`",
                session.env_id(),
                buf.id
            );
            ensure!(
                session.policy_id() == policy.id,
                "session belongs to policy `{}`, not `{}`",
                session.policy_id(),
                policy.id
            );
            ensure!(session.plan() == plan, "session was opened with a different plan");
            Ok(match session.certificate() {
                Some(c) => CertifyOutcome::Certified(c),
                None => CertifyOutcome::Pending {
                    judged: session.judged(),
                    required: plan.m,
                },
            })
        }
    }
}
