//! Sampling-based certification: draw `m = ⌈ln(1/ν)/δ⌉` simulator sequences,
//! have each judged, and issue a pass certificate only if all are aligned.
//! If the true misalignment mass `δ'` exceeds `δ`, a pass happens with
//! probability `(1 − δ')^m ≤ e^{−δ'm} ≤ e^{−δm} ≤ ν`.

mod certificate;
mod log;
mod plan;
mod session;
mod soundness;

pub use certificate::{certify, Certificate, CertifyOutcome, Judge, Outcome};
pub use log::{
    log_digest, parse_log, sha256_hex, verdict_digest, verify_log_digest, Judgment, JudgmentLog,
    JudgmentSource, Verdict,
};
pub use plan::{required_samples, CertificationPlan};
pub use session::{
    certification_sequences, open_session, NextSequence, Session, SessionError, SessionStatus,
};
pub use soundness::{soundness_experiment, SoundnessReport};
