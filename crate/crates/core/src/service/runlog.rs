//! Append-only JSON-lines run logs, one file per run under the storage root.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::params::ControlDto;

const RUNS_DIR: &str = "runs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seq: u64,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    pub request_id: u64,
    pub control: ControlDto,
    pub tip_mm: [f64; 3],
    pub converged: bool,
    pub pattern: String,
    pub iterations: usize,
}

pub struct RunLog {
    id: String,
    path: PathBuf,
    file: File,
    next_seq: u64,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl RunLog {
    /// Start a new run. The id is unique within `root`: file creation is
    /// exclusive and retried with a fresh suffix on collision.
    pub fn create(root: &Path) -> io::Result<Self> {
        static COUNTER: AtomicU64 = AtomicU64::new(0);
        let dir = root.join(RUNS_DIR);
        std::fs::create_dir_all(&dir)?;
        loop {
            let id = format!(
                "{}-{}-{}",
                now_ms(),
                std::process::id(),
                COUNTER.fetch_add(1, Ordering::Relaxed)
            );
            let path = dir.join(format!("{id}.jsonl"));
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(file) => {
                    return Ok(RunLog {
                        id,
                        path,
                        file,
                        next_seq: 0,
                    })
                }
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e),
            }
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Write one record as a single line. `seq` and `timestamp_ms` are
    /// assigned here.
    pub fn append(&mut self, mut record: RunRecord) -> io::Result<RunRecord> {
        record.seq = self.next_seq;
        record.timestamp_ms = now_ms();
        let mut line = serde_json::to_vec(&record).map_err(io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        self.next_seq += 1;
        Ok(record)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunContents {
    pub records: Vec<RunRecord>,
    /// A partial last record was found and dropped.
    pub truncated: bool,
}

/// Parse a run log. A damaged final line (no newline or not parseable) is
/// dropped with a warning; damage anywhere else is an error.
pub fn read_run(path: &Path) -> io::Result<RunContents> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    let mut truncated = false;
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    for (i, raw) in lines.iter().enumerate() {
        let last = i + 1 == lines.len();
        let complete = raw.ends_with('\n');
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        match serde_json::from_str::<RunRecord>(line) {
            Ok(r) if complete => records.push(r),
            result if last => {
                log::warn!(
                    "{}: dropping partial trailing record ({})",
                    path.display(),
                    result.err().map_or("missing newline".to_string(), |e| e.to_string())
                );
                truncated = true;
            }
            Err(e) => {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("{}: line {}: {e}", path.display(), i + 1),
                ))
            }
            Ok(_) => unreachable!("only the last line can lack a newline"),
        }
    }
    Ok(RunContents { records, truncated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{ActuatorParams, ControlInput};

    fn record(i: u64) -> RunRecord {
        RunRecord {
            seq: 0,
            timestamp_ms: 0,
            request_id: i,
            control: ControlInput::relaxed(&ActuatorParams::default()).into(),
            tip_mm: [0.0, i as f64, 290.0],
            converged: true,
            pattern: "C-shaped".into(),
            iterations: 3,
        }
    }

    #[test]
    fn ids_are_unique() {
        let dir = tempfile::tempdir().unwrap();
        let a = RunLog::create(dir.path()).unwrap();
        let b = RunLog::create(dir.path()).unwrap();
        assert_ne!(a.id(), b.id());
        assert_ne!(a.path(), b.path());
    }

    #[test]
    fn append_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = RunLog::create(dir.path()).unwrap();
        let written: Vec<_> = (0..3).map(|i| log.append(record(i)).unwrap()).collect();
        assert_eq!(written.iter().map(|r| r.seq).collect::<Vec<_>>(), [0, 1, 2]);
        let back = read_run(log.path()).unwrap();
        assert_eq!(back.records, written);
        assert!(!back.truncated);
    }

    #[test]
    fn every_truncation_parses() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = RunLog::create(dir.path()).unwrap();
        for i in 0..4 {
            log.append(record(i)).unwrap();
        }
        let full = std::fs::read(log.path()).unwrap();
        let cut = dir.path().join("cut.jsonl");
        for len in 0..=full.len() {
            std::fs::write(&cut, &full[..len]).unwrap();
            let c = read_run(&cut).unwrap();
            let boundaries = full[..len].iter().filter(|&&b| b == b'\n').count();
            assert_eq!(c.records.len(), boundaries, "len {len}");
            let at_boundary = len == 0 || full[len - 1] == b'\n';
            assert_eq!(c.truncated, !at_boundary, "len {len}");
        }
    }

    #[test]
    fn damage_before_the_end_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        let good = serde_json::to_string(&record(1)).unwrap();
        std::fs::write(&p, format!("{{oops\n{good}\n")).unwrap();
        assert!(read_run(&p).is_err());
    }
}
