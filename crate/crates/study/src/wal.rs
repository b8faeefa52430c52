//! Append-only event log. Every state change is one JSON line, flushed and
//! synced before the change becomes visible; startup replays the log.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use roleplay_core::study::{CollectionSession, EvaluationPair, Judgment};
use roleplay_core::Dialogue;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    /// Full snapshot of a session after a mutation.
    SessionSaved { session: Box<CollectionSession> },
    /// One import request; imported all at once or not at all.
    DialoguesImported { dialogues: Vec<Dialogue> },
    PairsAllocated { participant: String, pairs: Vec<EvaluationPair> },
    PairServed { participant: String, pair_id: String, at: DateTime<Utc> },
    JudgmentRecorded { judgment: Judgment },
}

#[derive(Debug, thiserror::Error)]
pub enum WalError {
    #[error("event log {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("event log {path} line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

#[derive(Debug)]
pub struct Wal {
    path: PathBuf,
    file: File,
    sync: bool,
}

impl Wal {
    /// Opens (creating if needed) the log and returns the events already in
    /// it. A torn final line, one without its newline, is dropped and cut
    /// from the file; any other unreadable line is an error.
    pub fn open(path: &Path, sync: bool) -> Result<(Self, Vec<Event>), WalError> {
        let io_err = |source| WalError::Io { path: path.to_path_buf(), source };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io_err)?;
        }
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(e)),
        };
        let complete_len = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if complete_len < bytes.len() {
            tracing::warn!(path = %path.display(), dropped = bytes.len() - complete_len, "discarding torn final event");
        }
        let mut events = Vec::new();
        for (i, line) in bytes[..complete_len].split(|&b| b == b'\n').enumerate() {
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            let event = serde_json::from_slice(line).map_err(|e| WalError::Corrupt {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            events.push(event);
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
        if complete_len < bytes.len() {
            file.set_len(complete_len as u64).map_err(io_err)?;
        }
        Ok((Wal { path: path.to_path_buf(), file, sync }, events))
    }

    pub fn append(&mut self, event: &Event) -> Result<(), WalError> {
        let mut line = serde_json::to_vec(event).expect("events serialize");
        line.push(b'\n');
        let res = self.file.write_all(&line).and_then(|()| if self.sync { self.file.sync_data() } else { self.file.flush() });
        res.map_err(|source| WalError::Io { path: self.path.clone(), source })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
