//! Journal records: one self-describing JSON line per journaled run.
//!
//! A record carries everything needed to reproduce a result: the command,
//! the fully resolved configuration, a fingerprint (shape + SHA-256) of
//! every input file, and the command's payload. Writers take an exclusive
//! file lock around each append so concurrent runs interleave whole lines,
//! never fragments.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Shape and content hash of one input file.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct FileFingerprint {
    pub path: String,
    pub rows: usize,
    pub cols: usize,
    pub sha256: String,
}

/// One journal line.
#[derive(Serialize, Deserialize, Debug, Clone)]
pub struct RunRecord {
    pub timestamp: String,
    pub version: String,
    pub command: String,
    pub config: Value,
    pub inputs: Vec<FileFingerprint>,
    pub payload: Value,
}

impl RunRecord {
    pub fn new(command: &str, config: Value, inputs: Vec<FileFingerprint>, payload: Value) -> Self {
        RunRecord {
            timestamp: timestamp(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config,
            inputs,
            payload,
        }
    }
}

/// RFC 3339 UTC timestamp, honouring `SOURCE_DATE_EPOCH` for reproducible
/// journals.
fn timestamp() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0))
        .unwrap_or_else(chrono::Utc::now);
    now.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Fingerprint a file the command has already parsed as an
/// `rows` × `cols` table.
pub fn fingerprint(path: &Path, rows: usize, cols: usize) -> Result<FileFingerprint, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    let mut sha256 = String::with_capacity(64);
    for b in digest {
        sha256.push_str(&format!("{b:02x}"));
    }
    Ok(FileFingerprint {
        path: path.display().to_string(),
        rows,
        cols,
        sha256,
    })
}

/// Append one record to the journal under an exclusive lock.
pub fn append_journal(journal: &Path, record: &RunRecord) -> Result<(), CliError> {
    let line = serde_json::to_string(record)
        .map_err(|e| CliError::Data(format!("cannot encode journal record: {e}")))?;
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(journal)
        .map_err(|e| CliError::Data(format!("cannot open journal {}: {e}", journal.display())))?;
    file.lock()
        .map_err(|e| CliError::Data(format!("cannot lock journal {}: {e}", journal.display())))?;
    let outcome = file
        .write_all(line.as_bytes())
        .and_then(|()| file.write_all(b"\n"))
        .and_then(|()| file.flush());
    let unlocked = file.unlock();
    outcome
        .map_err(|e| CliError::Data(format!("cannot write journal {}: {e}", journal.display())))?;
    unlocked
        .map_err(|e| CliError::Data(format!("cannot unlock journal {}: {e}", journal.display())))?;
    Ok(())
}

/// Read every record currently in the journal (absent file = empty).
pub fn read_journal(journal: &Path) -> Result<Vec<RunRecord>, CliError> {
    let text = match std::fs::read_to_string(journal) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => {
            return Err(CliError::Data(format!(
                "cannot read journal {}: {e}",
                journal.display()
            )))
        }
    };
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: RunRecord = serde_json::from_str(line).map_err(|e| {
            CliError::Data(format!(
                "journal {} line {}: not a run record: {e}",
                journal.display(),
                idx + 1
            ))
        })?;
        records.push(record);
    }
    Ok(records)
}
