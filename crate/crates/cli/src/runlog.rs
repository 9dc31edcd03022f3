//! Per-command bookkeeping: declared outputs, timings and the JSON run log.
//!
//! Outputs are registered before they are written. If the command fails
//! (the [`Run`] is dropped without [`Run::finish`]) every registered output
//! is deleted, including a run log left by an earlier success.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{io_err, CliError, CliResult};

pub const HASH: &str = "sha256";

#[derive(Debug, Serialize)]
struct FileRecord {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunLog<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    args: &'a [String],
    parameters: &'a Value,
    hash: &'static str,
    inputs: Vec<FileRecord>,
    outputs: Vec<FileRecord>,
    timings_s: &'a BTreeMap<String, f64>,
    elapsed_s: f64,
    started_at: String,
    finished_at: String,
}

/// Hex digest of a file, or of a directory as the digest of its sorted
/// `relative-path digest` lines.
pub fn digest_path(path: &Path) -> CliResult<String> {
    if path.is_dir() {
        let mut lines = Vec::new();
        collect(path, path, &mut lines)?;
        lines.sort();
        let mut h = Sha256::new();
        for l in lines {
            h.update(l.as_bytes());
            h.update(b"\n");
        }
        Ok(hex::encode(h.finalize()))
    } else {
        let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<String>) -> CliResult<()> {
    for entry in std::fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let p = entry.map_err(|e| io_err(dir, e))?.path();
        if p.is_dir() {
            collect(root, &p, out)?;
        } else {
            let rel = p.strip_prefix(root).unwrap_or(&p).to_string_lossy().replace('\\', "/");
            out.push(format!("{rel} {}", digest_path(&p)?));
        }
    }
    Ok(())
}

pub struct Run {
    command: String,
    args: Vec<String>,
    log_path: PathBuf,
    parameters: Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    timings: BTreeMap<String, f64>,
    start: Instant,
    started_at: String,
    finished: bool,
}

impl Run {
    /// Starts a run whose log goes to `<out>/<command>.run.json`.
    pub fn start(command: &str, args: Vec<String>, out: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
        let log_path = out.join(format!("{command}.run.json"));
        Ok(Run {
            command: command.to_string(),
            args,
            outputs: vec![log_path.clone()],
            log_path,
            parameters: Value::Null,
            inputs: Vec::new(),
            timings: BTreeMap::new(),
            start: Instant::now(),
            started_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            finished: false,
        })
    }

    pub fn parameters(&mut self, params: &impl Serialize) -> CliResult<()> {
        self.parameters = serde_json::to_value(params).map_err(|e| CliError::invalid(e.to_string()))?;
        Ok(())
    }

    /// Records an input; it must exist.
    pub fn input(&mut self, path: &Path) -> CliResult<PathBuf> {
        if !path.exists() {
            return Err(CliError::Io(format!("{}: no such file or directory", path.display())));
        }
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
        Ok(path.to_path_buf())
    }

    /// Declares an output file, creating its parent directory.
    pub fn output(&mut self, path: PathBuf) -> CliResult<PathBuf> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        if !self.outputs.contains(&path) {
            self.outputs.push(path.clone());
        }
        Ok(path)
    }

    /// Declares an output directory and empties it, so a re-run leaves no
    /// stale files behind.
    pub fn output_dir(&mut self, path: PathBuf) -> CliResult<PathBuf> {
        if path.exists() {
            std::fs::remove_dir_all(&path).map_err(|e| io_err(&path, e))?;
        }
        std::fs::create_dir_all(&path).map_err(|e| io_err(&path, e))?;
        if !self.outputs.contains(&path) {
            self.outputs.push(path.clone());
        }
        Ok(path)
    }

    /// Runs `f`, adding its wall time under `name`.
    pub fn timed<R>(&mut self, name: &str, f: impl FnOnce() -> R) -> R {
        let t = Instant::now();
        let r = f();
        *self.timings.entry(name.to_string()).or_default() += t.elapsed().as_secs_f64();
        r
    }

    fn records(paths: &[PathBuf]) -> CliResult<Vec<FileRecord>> {
        paths
            .iter()
            .filter(|p| p.exists())
            .map(|p| Ok(FileRecord { path: p.display().to_string(), sha256: digest_path(p)? }))
            .collect()
    }

    /// Writes the run log. Outputs are kept from here on.
    pub fn finish(mut self) -> CliResult<PathBuf> {
        let outputs: Vec<PathBuf> = self.outputs.iter().filter(|p| **p != self.log_path).cloned().collect();
        let log = RunLog {
            tool: "heliomap",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            args: &self.args,
            parameters: &self.parameters,
            hash: HASH,
            inputs: Self::records(&self.inputs)?,
            outputs: Self::records(&outputs)?,
            timings_s: &self.timings,
            elapsed_s: self.start.elapsed().as_secs_f64(),
            started_at: self.started_at.clone(),
            finished_at: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        };
        let text = serde_json::to_string_pretty(&log).map_err(|e| CliError::invalid(e.to_string()))?;
        std::fs::write(&self.log_path, text + "\n").map_err(|e| io_err(&self.log_path, e))?;
        self.finished = true;
        log::info!("{} finished in {:.2}s", self.command, self.start.elapsed().as_secs_f64());
        Ok(self.log_path.clone())
    }
}

impl Drop for Run {
    fn drop(&mut self) {
        if self.finished {
            return;
        }
        for p in &self.outputs {
            let r = if p.is_dir() { std::fs::remove_dir_all(p) } else { std::fs::remove_file(p) };
            match r {
                Ok(()) => log::debug!("removed partial output {}", p.display()),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => log::warn!("could not remove {}: {e}", p.display()),
            }
        }
    }
}
