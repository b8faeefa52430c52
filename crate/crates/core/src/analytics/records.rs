//! JSONL persistence. Each line is one [`DialogueRecord`]: the dialogue's
//! fields flattened alongside `schema_version` and `run_id`.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::Dialogue;
use crate::engine::DialogueSink;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueRecord {
    pub schema_version: u32,
    pub run_id: String,
    #[serde(flatten)]
    pub dialogue: Dialogue,
}

impl DialogueRecord {
    pub fn new(run_id: impl Into<String>, dialogue: Dialogue) -> Self {
        DialogueRecord { schema_version: SCHEMA_VERSION, run_id: run_id.into(), dialogue }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    pub fn from_line(line: &str) -> Result<Self, String> {
        let record: DialogueRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if record.schema_version != SCHEMA_VERSION {
            return Err(format!("unsupported schema_version {}", record.schema_version));
        }
        Ok(record)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Line { path: PathBuf, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RecordError + '_ {
    move |source| RecordError::Io { path: path.to_path_buf(), source }
}

/// Appends records to a JSONL file, one line each, flushing per record.
pub struct RecordWriter {
    path: PathBuf,
    out: BufWriter<File>,
    run_id: String,
    written: usize,
}

impl RecordWriter {
    /// Opens `path` for appending, creating it if needed.
    pub fn append(path: &Path, run_id: impl Into<String>) -> Result<Self, RecordError> {
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
        Ok(RecordWriter { path: path.to_path_buf(), out: BufWriter::new(file), run_id: run_id.into(), written: 0 })
    }

    /// Truncates `path` and starts a fresh file.
    pub fn create(path: &Path, run_id: impl Into<String>) -> Result<Self, RecordError> {
        File::create(path).map_err(io_err(path))?;
        Self::append(path, run_id)
    }

    pub fn set_run_id(&mut self, run_id: impl Into<String>) {
        self.run_id = run_id.into();
    }

    pub fn write(&mut self, record: &DialogueRecord) -> Result<(), RecordError> {
        let mut line = record.to_line();
        line.push('\n');
        self.out.write_all(line.as_bytes()).and_then(|_| self.out.flush()).map_err(io_err(&self.path))?;
        self.written += 1;
        Ok(())
    }

    pub fn written(&self) -> usize {
        self.written
    }
}

impl DialogueSink for RecordWriter {
    fn begin(&mut self, run_id: &str) {
        self.set_run_id(run_id);
    }

    fn accept(&mut self, dialogue: &Dialogue) -> std::io::Result<()> {
        let record = DialogueRecord::new(self.run_id.clone(), dialogue.clone());
        self.write(&record).map_err(std::io::Error::other)
    }
}

/// Writes `records` to `path`, replacing any existing content.
pub fn write_records(records: &[DialogueRecord], path: &Path) -> Result<usize, RecordError> {
    let mut writer = RecordWriter::create(path, "")?;
    records.iter().try_for_each(|r| writer.write(r))?;
    Ok(writer.written())
}

/// Appends `records` to `path`.
pub fn append_records(records: &[DialogueRecord], path: &Path) -> Result<usize, RecordError> {
    let mut writer = RecordWriter::append(path, "")?;
    records.iter().try_for_each(|r| writer.write(r))?;
    Ok(writer.written())
}

/// Result of a lenient read: every record before the first bad line, plus
/// the error for that line if there was one.
#[derive(Debug)]
pub struct LenientRead {
    pub records: Vec<DialogueRecord>,
    pub error: Option<RecordError>,
}

/// Parses JSONL bytes; blank lines are skipped. Stops at the first bad line.
pub fn parse_records(bytes: &[u8], origin: &Path) -> LenientRead {
    let mut records = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let parsed = std::str::from_utf8(raw).map_err(|e| e.to_string()).and_then(|line| {
            if line.trim().is_empty() {
                Ok(None)
            } else {
                DialogueRecord::from_line(line).map(Some)
            }
        });
        match parsed {
            Ok(Some(r)) => records.push(r),
            Ok(None) => {}
            Err(message) => {
                let error = RecordError::Line { path: origin.to_path_buf(), line: i + 1, message };
                return LenientRead { records, error: Some(error) };
            }
        }
    }
    LenientRead { records, error: None }
}

pub fn read_records_lenient(path: &Path) -> Result<LenientRead, RecordError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(parse_records(&bytes, path))
}

/// Reads every record, failing on the first malformed line.
pub fn read_records(path: &Path) -> Result<Vec<DialogueRecord>, RecordError> {
    let read = read_records_lenient(path)?;
    match read.error {
        Some(e) => Err(e),
        None => Ok(read.records),
    }
}
