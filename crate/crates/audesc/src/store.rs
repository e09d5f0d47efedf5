//! Append-only JSONL event journal with the interaction log rebuilt in memory.
//!
//! Each line is one [`Entry`]. Ids count up from 1 per stream. Every append is
//! flushed and synced before it is acknowledged.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use audesc_core::analytics::{InteractionLog, LogEvent, SchemaError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub stream: String,
    pub id: u64,
    pub at_ms: i64,
    pub event: LogEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordId {
    pub stream: String,
    pub id: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("schema violation: {0}")]
    SchemaViolation(#[from] SchemaError),
    #[error("storage failure: {0}")]
    StorageFailure(String),
}

struct Inner {
    file: File,
    log: InteractionLog,
    next_id: BTreeMap<String, u64>,
    lines: Vec<(RecordId, String)>,
}

pub struct Store {
    path: PathBuf,
    inner: Mutex<Inner>,
}

pub fn now_ms() -> i64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_millis() as i64)
}

fn storage(path: &Path, e: impl std::fmt::Display) -> StoreError {
    StoreError::StorageFailure(format!("{}: {e}", path.display()))
}

impl Store {
    /// Opens or creates the journal and replays it.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| storage(dir, e))?;
        }
        let file = OpenOptions::new().create(true).append(true).read(true).open(path).map_err(|e| storage(path, e))?;
        let mut inner = Inner { file, log: InteractionLog::default(), next_id: BTreeMap::new(), lines: Vec::new() };
        let reader = BufReader::new(File::open(path).map_err(|e| storage(path, e))?);
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| storage(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: Entry =
                serde_json::from_str(&line).map_err(|e| storage(path, format!("line {}: {e}", n + 1)))?;
            let next = inner.next_id.entry(entry.stream.clone()).or_insert(1);
            if entry.id < *next || entry.stream != entry.event.stream() {
                return Err(storage(path, format!("line {}: id or stream out of sequence", n + 1)));
            }
            *next = entry.id + 1;
            let id = RecordId { stream: entry.stream, id: entry.id };
            inner.log.apply(entry.event).map_err(|e| storage(path, format!("line {}: {e}", n + 1)))?;
            inner.lines.push((id, line));
        }
        Ok(Self { path: path.to_path_buf(), inner: Mutex::new(inner) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Validates, appends durably, then folds the event into the in-memory log.
    pub fn record(&self, event: LogEvent) -> Result<RecordId, StoreError> {
        self.record_at(event, now_ms())
    }

    pub fn record_at(&self, event: LogEvent, at_ms: i64) -> Result<RecordId, StoreError> {
        let mut inner = self.inner.lock().map_err(|_| StoreError::StorageFailure("store lock poisoned".into()))?;
        let mut next_log = inner.log.clone();
        next_log.apply(event.clone())?;

        let stream = event.stream().to_string();
        let id = *inner.next_id.get(&stream).unwrap_or(&1);
        let entry = Entry { stream: stream.clone(), id, at_ms, event };
        let line = serde_json::to_string(&entry).map_err(|e| storage(&self.path, e))?;
        let mut bytes = line.clone().into_bytes();
        bytes.push(b'\n');
        inner.file.write_all(&bytes).map_err(|e| storage(&self.path, e))?;
        inner.file.sync_data().map_err(|e| storage(&self.path, e))?;

        inner.log = next_log;
        inner.next_id.insert(stream.clone(), id + 1);
        let rid = RecordId { stream, id };
        inner.lines.push((rid.clone(), line));
        Ok(rid)
    }

    /// The stored line for a record, exactly as written.
    pub fn raw(&self, id: &RecordId) -> Option<String> {
        let inner = self.inner.lock().ok()?;
        inner.lines.iter().find(|(r, _)| r == id).map(|(_, l)| l.clone())
    }

    pub fn entries(&self) -> Vec<Entry> {
        let inner = self.inner.lock().expect("store lock");
        inner.lines.iter().map(|(_, l)| serde_json::from_str(l).expect("lines were written by this store")).collect()
    }

    pub fn count(&self, stream: &str) -> usize {
        let inner = self.inner.lock().expect("store lock");
        inner.lines.iter().filter(|(r, _)| r.stream == stream).count()
    }

    pub fn log(&self) -> InteractionLog {
        self.inner.lock().expect("store lock").log.clone()
    }

    /// Newest session for a video, if any.
    pub fn latest_session_for(&self, video_id: &str) -> Option<String> {
        let inner = self.inner.lock().expect("store lock");
        inner.log.sessions.iter().rev().find(|s| s.video_id == video_id).map(|s| s.session_id.clone())
    }

    pub fn has_session(&self, session_id: &str) -> bool {
        self.inner.lock().expect("store lock").log.session(session_id).is_some()
    }
}

/// Reads a journal without opening it for writing.
pub fn read_log(path: &Path) -> Result<InteractionLog, StoreError> {
    let text = std::fs::read_to_string(path).map_err(|e| storage(path, e))?;
    let mut log = InteractionLog::default();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let entry: Entry = serde_json::from_str(line).map_err(|e| storage(path, format!("line {}: {e}", n + 1)))?;
        log.apply(entry.event)?;
    }
    Ok(log)
}
