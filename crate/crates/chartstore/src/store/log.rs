//! Append-only mutation log: one JSON event per line, flushed per append.
//!
//! The log is the version counter — the highest version equals the line
//! count, so no second mutable file is needed.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::page::WriterRole;
use super::path::{NodePath, PageRef};

pub const LOG_FILE: &str = "mutations.jsonl";

/// Append-only record of one document write.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationEvent {
    /// Global, strictly monotone, gapless version (1, 2, 3, ...).
    pub version: u64,
    /// Logical leaf path of the mutated document.
    pub doc_id: NodePath,
    /// Concrete page revision written by this event.
    pub page_ref: PageRef,
    pub writer_role: WriterRole,
    /// Escalations are delivered ahead of standard notifications.
    pub priority: bool,
    /// Wall-clock time in unix milliseconds; informational only — ordering
    /// authority is the version counter.
    pub timestamp: u64,
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt log line {line}: {source}")]
    Corrupt {
        line: usize,
        source: serde_json::Error,
    },
    #[error("log versions not gapless at line {line}: expected {expected}, found {found}")]
    VersionGap { line: usize, expected: u64, found: u64 },
}

/// Writer half; guarded by the store's internal write region.
pub(crate) struct LogWriter {
    file: File,
    next_version: u64,
}

impl LogWriter {
    pub fn open(store_root: &Path) -> Result<Self, LogError> {
        let path = store_root.join(LOG_FILE);
        let existing = if path.exists() { read_log(&path)? } else { Vec::new() };
        let next_version = existing.last().map(|e| e.version).unwrap_or(0) + 1;
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(LogWriter { file, next_version })
    }

    pub fn next_version(&self) -> u64 {
        self.next_version
    }

    /// Append one event line and flush it to disk.
    pub fn append(&mut self, event: &MutationEvent) -> Result<(), LogError> {
        debug_assert_eq!(event.version, self.next_version);
        let mut line = serde_json::to_string(event).expect("event serializes");
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.flush()?;
        self.next_version += 1;
        Ok(())
    }
}

/// Read and validate the full log.
pub fn read_log(path: &Path) -> Result<Vec<MutationEvent>, LogError> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: MutationEvent =
            serde_json::from_str(&line).map_err(|source| LogError::Corrupt { line: i + 1, source })?;
        let expected = events.len() as u64 + 1;
        if event.version != expected {
            return Err(LogError::VersionGap { line: i + 1, expected, found: event.version });
        }
        events.push(event);
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn event(version: u64) -> MutationEvent {
        MutationEvent {
            version,
            doc_id: NodePath::leaf("S1", "hadm_2", "triage.md").unwrap(),
            page_ref: PageRef {
                path: NodePath::leaf("S1", "hadm_2", "triage.md").unwrap(),
                revision: 1,
            },
            writer_role: WriterRole::System,
            priority: false,
            timestamp: 1_700_000_000_000,
        }
    }

    #[test]
    fn append_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = LogWriter::open(dir.path()).unwrap();
        assert_eq!(w.next_version(), 1);
        w.append(&event(1)).unwrap();
        w.append(&event(2)).unwrap();
        let events = read_log(&dir.path().join(LOG_FILE)).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[1].version, 2);

        // Reopen resumes the counter.
        drop(w);
        let w = LogWriter::open(dir.path()).unwrap();
        assert_eq!(w.next_version(), 3);
    }

    #[test]
    fn version_gap_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LOG_FILE);
        let e1 = serde_json::to_string(&event(1)).unwrap();
        let e3 = serde_json::to_string(&event(3)).unwrap();
        std::fs::write(&path, format!("{e1}\n{e3}\n")).unwrap();
        match read_log(&path) {
            Err(LogError::VersionGap { expected: 2, found: 3, .. }) => {}
            other => panic!("expected version gap, got {other:?}"),
        }
    }
}
