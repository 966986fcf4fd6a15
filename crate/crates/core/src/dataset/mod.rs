//! Dataset files: writing, reading, validation against the corpus, and
//! summary statistics.
//!
//! A dataset is a line-record file with one [`Conversation`] per line.

mod stats;
mod validate;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dialog::Conversation;

pub use stats::{stats, DatasetStats};
pub use validate::{validate, validate_conversation, Rule, ValidationReport, Violation};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read or write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset line {line}: {reason}")]
    SchemaViolation { line: usize, reason: String },
}

pub fn write_dataset(conversations: &[Conversation], path: &Path) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for conversation in conversations {
        serde_json::to_writer(&mut w, conversation).map_err(|e| io(e.into()))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a dataset; blank lines are skipped and ids must be unique.
pub fn read_dataset(path: &Path) -> Result<Vec<Conversation>, DatasetError> {
    let io = |source| DatasetError::Io { path: path.to_path_buf(), source };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |reason: String| DatasetError::SchemaViolation { line: i + 1, reason };
        let conversation: Conversation = serde_json::from_str(&line).map_err(|e| schema(e.to_string()))?;
        if !ids.insert(conversation.id.clone()) {
            return Err(schema(format!("duplicate conversation id {}", conversation.id)));
        }
        out.push(conversation);
    }
    Ok(out)
}
