use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Aligned,
    Misaligned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "id")]
pub enum JudgmentSource {
    Programmatic(String),
    Human(String),
}

/// One recorded verdict on one sampled sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judgment {
    pub sequence_index: u64,
    pub verdict: Verdict,
    pub source: JudgmentSource,
    pub timestamp: DateTime<Utc>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of a JSON Lines judgment log as stored on disk.
pub fn log_digest(text: &str) -> String {
    sha256_hex(text.as_bytes())
}

pub fn verify_log_digest(path: &Path, digest: &str) -> Result<bool> {
    Ok(log_digest(&std::fs::read_to_string(path)?) == digest)
}

/// Digest of the bare verdict sequence (`index:verdict` lines), independent of
/// timestamps and judgment sources.
pub fn verdict_digest<'a>(judgments: impl IntoIterator<Item = &'a Judgment>) -> String {
    let mut text = String::new();
    for j in judgments {
        let v = match j.verdict {
            Verdict::Aligned => "aligned",
            Verdict::Misaligned => "misaligned",
        };
        text.push_str(&format!("{}:{v}\n", j.sequence_index));
    }
    sha256_hex(text.as_bytes())
}

/// Append-only judgment log, optionally mirrored to a JSONL file.
#[derive(Debug, Default)]
pub struct JudgmentLog {
    judgments: Vec<Judgment>,
    text: String,
    sink: Option<File>,
}

impl JudgmentLog {
    pub fn new() -> Self {
        JudgmentLog::default()
    }

    /// Mirrors future appends to `path` (created or appended to).
    pub fn attach_file(&mut self, path: &Path) -> Result<()> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.sink = Some(file);
        Ok(())
    }

    pub fn append(&mut self, judgment: Judgment) -> Result<()> {
        let mut line = serde_json::to_string(&judgment)?;
        line.push('\n');
        if let Some(f) = self.sink.as_mut() {
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        self.text.push_str(&line);
        self.judgments.push(judgment);
        Ok(())
    }

    pub fn judgments(&self) -> &[Judgment] {
        &self.judgments
    }

    pub fn len(&self) -> usize {
        self.judgments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn digest(&self) -> String {
        log_digest(&self.text)
    }
}

pub fn parse_log(text: &str) -> Result<Vec<Judgment>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
