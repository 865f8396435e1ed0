//! Append-only event log. Every record carries virtual time only, so two
//! runs fed the same inputs write identical files.

use std::collections::VecDeque;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use grs_core::time::Instant;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Command,
    StatusEdge,
    ModeChange,
    AuthFailure,
    LinkFault,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub seq: u64,
    /// Virtual clock ticks.
    pub ticks: u64,
    pub time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub panel: Option<String>,
    pub kind: EventKind,
    pub payload: Value,
}

struct FileSink {
    path: PathBuf,
    out: BufWriter<File>,
    written: u64,
    rotate_bytes: u64,
    keep: usize,
}

impl FileSink {
    fn open(path: PathBuf, rotate_bytes: u64, keep: usize) -> io::Result<FileSink> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).write(true).truncate(true).open(&path)?;
        Ok(FileSink { path, out: BufWriter::new(file), written: 0, rotate_bytes, keep })
    }

    fn rotated(&self, n: usize) -> PathBuf {
        let mut s = self.path.clone().into_os_string();
        s.push(format!(".{n}"));
        PathBuf::from(s)
    }

    fn rotate(&mut self) -> io::Result<()> {
        self.out.flush()?;
        if self.keep == 0 {
            let file = OpenOptions::new().write(true).truncate(true).open(&self.path)?;
            self.out = BufWriter::new(file);
            self.written = 0;
            return Ok(());
        }
        let _ = fs::remove_file(self.rotated(self.keep));
        for n in (1..self.keep).rev() {
            let from = self.rotated(n);
            if from.exists() {
                fs::rename(&from, self.rotated(n + 1))?;
            }
        }
        fs::rename(&self.path, self.rotated(1))?;
        let file = OpenOptions::new().create(true).write(true).truncate(true).open(&self.path)?;
        self.out = BufWriter::new(file);
        self.written = 0;
        Ok(())
    }

    fn write_line(&mut self, line: &str) -> io::Result<()> {
        let len = line.len() as u64 + 1;
        if self.written > 0 && self.written + len > self.rotate_bytes {
            self.rotate()?;
        }
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.written += len;
        Ok(())
    }
}

/// Recent events are kept in memory for queries; all events go to the
/// file sink when one is attached.
pub struct AuditLog {
    next_seq: u64,
    recent: VecDeque<AuditEvent>,
    capacity: usize,
    sink: Option<FileSink>,
    io_errors: u64,
}

impl AuditLog {
    pub fn in_memory() -> AuditLog {
        AuditLog { next_seq: 1, recent: VecDeque::new(), capacity: 1_000_000, sink: None, io_errors: 0 }
    }

    /// Truncates `path` and logs into it, rotating to `path.1`, `path.2`, ...
    /// once it would grow past `rotate_bytes`.
    pub fn to_file(path: &Path, rotate_bytes: u64, keep: usize) -> io::Result<AuditLog> {
        let mut log = AuditLog::in_memory();
        log.sink = Some(FileSink::open(path.to_path_buf(), rotate_bytes.max(1), keep)?);
        Ok(log)
    }

    pub fn set_capacity(&mut self, capacity: usize) {
        self.capacity = capacity.max(1);
        while self.recent.len() > self.capacity {
            self.recent.pop_front();
        }
    }

    pub fn append(&mut self, at: Instant, panel: Option<&str>, kind: EventKind, payload: Value) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        let ev = AuditEvent {
            seq,
            ticks: at.ticks(),
            time_s: at.as_secs_f64(),
            panel: panel.map(str::to_string),
            kind,
            payload,
        };
        if let Some(sink) = self.sink.as_mut() {
            // serializing plain data cannot fail
            let line = serde_json::to_string(&ev).unwrap_or_default();
            if sink.write_line(&line).is_err() {
                self.io_errors += 1;
            }
        }
        if self.recent.len() == self.capacity {
            self.recent.pop_front();
        }
        self.recent.push_back(ev);
        seq
    }

    pub fn events(&self) -> impl Iterator<Item = &AuditEvent> {
        self.recent.iter()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.recent.iter().filter(|e| e.kind == kind).count()
    }

    pub fn last_seq(&self) -> u64 {
        self.next_seq - 1
    }

    pub fn io_errors(&self) -> u64 {
        self.io_errors
    }

    pub fn flush(&mut self) -> io::Result<()> {
        match self.sink.as_mut() {
            Some(s) => s.out.flush(),
            None => Ok(()),
        }
    }
}

impl Drop for AuditLog {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}
