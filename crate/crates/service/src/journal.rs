//! Append-only JSON-lines journal of feedback, retrains and review tags.
//!
//! A feedback batch is written as one `feedback` line per pixel followed by
//! a `commit` line carrying the classifier version it produced and the
//! training steps used, in a single write. Replay applies feedback only at
//! commits, so a batch cut short by a crash (no commit) is dropped, and a
//! torn final line is ignored.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use heliomap::analysis::ValidationTag;
use heliomap::weaklabel::FeedbackEvent;
use heliomap::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Entry {
    Feedback {
        #[serde(flatten)]
        event: FeedbackEvent,
    },
    Commit {
        version: u64,
        steps: usize,
        lr: f64,
    },
    Tag(TagRecord),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagRecord {
    pub prediction_id: String,
    pub tag: ValidationTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator: Option<String>,
    pub timestamp: DateTime<Utc>,
}

pub struct Journal {
    path: PathBuf,
    file: File,
}

impl Journal {
    pub fn open(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
        Ok(Journal { path: path.to_path_buf(), file })
    }

    /// Writes the entries with one `write` call and syncs.
    pub fn append(&mut self, entries: &[Entry]) -> Result<()> {
        let mut buf = String::new();
        for e in entries {
            buf.push_str(&serde_json::to_string(e).expect("journal entries serialize"));
            buf.push('\n');
        }
        self.file.write_all(buf.as_bytes()).map_err(|e| Error::io(&self.path, e))?;
        self.file.sync_data().map_err(|e| Error::io(&self.path, e))
    }
}

/// Parses a journal. A missing file is an empty journal.
pub fn read_entries(path: &Path) -> Result<Vec<Entry>> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(e) => out.push(e),
            Err(_) if i + 1 == lines.len() && !complete => {
                log::warn!("ignoring torn final journal line {}", i + 1);
            }
            Err(e) => return Err(Error::Parse(format!("{} line {}: {e}", path.display(), i + 1))),
        }
    }
    Ok(out)
}
