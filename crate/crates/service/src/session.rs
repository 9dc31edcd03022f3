//! The labeling session: classifier state, feedback, tags and exports.
//!
//! Writers (feedback, retrain, tags) serialize on one mutex and publish a
//! new [`Snapshot`]; readers clone the current snapshot and never block on
//! training.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex, MutexGuard, RwLock, TryLockError};

use chrono::Utc;
use heliomap::analysis::{validation_tally, ValidationTag, ValidationTally};
use heliomap::raster::render::{class_color, cluster_color, encode_png, render_ids, render_rgb, TRUE_COLOR};
use heliomap::raster::{write_mask, BAND_COUNT};
use heliomap::weaklabel::{class_map, merge_loss, render_weak_labels, train_merge, FeedbackEvent, DEFAULT_MERGE_LR};
use heliomap::{Error, MergeClassifier};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::journal::{read_entries, Entry, Journal, TagRecord};
use crate::workspace::{Prediction, Workspace, EXPORT_DIR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Gradient steps run after each feedback batch.
    pub step_budget: usize,
    /// Default steps for an explicit full retrain.
    pub retrain_steps: usize,
    pub lr: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig { step_budget: 100, retrain_steps: 2000, lr: DEFAULT_MERGE_LR }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> heliomap::Result<()> {
        if self.step_budget == 0 || self.retrain_steps == 0 {
            return Err(Error::Argument("step_budget and retrain_steps must be positive".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Argument(format!("lr must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub enum ServiceError {
    NotFound(String),
    Invalid(String),
    Conflict(String),
    Internal(Error),
}

impl std::fmt::Display for ServiceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ServiceError::NotFound(m) | ServiceError::Invalid(m) | ServiceError::Conflict(m) => f.write_str(m),
            ServiceError::Internal(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for ServiceError {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument(m) | Error::Dimension(m) => ServiceError::Invalid(m),
            other => ServiceError::Internal(other),
        }
    }
}

pub type ServiceResult<T> = std::result::Result<T, ServiceError>;

/// Classifier state as of one version.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub version: u64,
    pub classifier: Arc<MergeClassifier>,
    pub feedback_count: usize,
    pub feedback_patches: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PixelLabel {
    pub row: usize,
    pub col: usize,
    pub class_id: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub version: u64,
    pub accepted: usize,
    pub feedback_count: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportedFile {
    pub patch_id: String,
    /// Relative to the workspace root.
    pub path: String,
    pub positive_pixels: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub classifier_version: u64,
    pub files: Vec<ExportedFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueItem {
    #[serde(flatten)]
    pub prediction: Prediction,
    pub tag: Option<ValidationTag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlayLayer {
    Clusters,
    Classes,
}

struct Writer {
    feedback: Vec<FeedbackEvent>,
    journal: Journal,
}

pub struct Session {
    ws: Workspace,
    cfg: ServiceConfig,
    snapshot: RwLock<Arc<Snapshot>>,
    writer: Mutex<Writer>,
    tags: RwLock<BTreeMap<String, TagRecord>>,
    exporting: Mutex<()>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

fn snapshot_of(version: u64, classifier: MergeClassifier, feedback: &[FeedbackEvent]) -> Snapshot {
    Snapshot {
        version,
        classifier: Arc::new(classifier),
        feedback_count: feedback.len(),
        feedback_patches: feedback.iter().map(|e| e.patch_id.clone()).collect(),
    }
}

impl Session {
    /// Opens the workspace state and replays its journal.
    pub fn open(ws: Workspace, cfg: ServiceConfig) -> heliomap::Result<Self> {
        cfg.validate()?;
        let journal_path = ws.journal_path();
        let mut clf = ws.initial_classifier.clone();
        let mut version = 0u64;
        let mut feedback: Vec<FeedbackEvent> = Vec::new();
        let mut pending: Vec<FeedbackEvent> = Vec::new();
        let mut tags = BTreeMap::new();
        for entry in read_entries(&journal_path)? {
            match entry {
                Entry::Feedback { event } => pending.push(event),
                Entry::Commit { version: v, steps, lr } => {
                    if v != version + 1 {
                        return Err(Error::Parse(format!("journal commit {v} follows version {version}")));
                    }
                    feedback.append(&mut pending);
                    clf = train_merge(&clf, &feedback, &ws, lr, steps)?;
                    version = v;
                }
                Entry::Tag(t) => {
                    if ws.prediction(&t.prediction_id).is_none() {
                        log::warn!("journal tag for unknown prediction {:?} ignored", t.prediction_id);
                        continue;
                    }
                    tags.insert(t.prediction_id.clone(), t);
                }
            }
        }
        if !pending.is_empty() {
            log::warn!("dropping {} uncommitted feedback events from the journal", pending.len());
        }
        log::info!("session at classifier version {version} with {} feedback events", feedback.len());
        let snapshot = snapshot_of(version, clf, &feedback);
        Ok(Session {
            cfg,
            snapshot: RwLock::new(Arc::new(snapshot)),
            writer: Mutex::new(Writer { feedback, journal: Journal::open(&journal_path)? }),
            tags: RwLock::new(tags),
            exporting: Mutex::new(()),
            ws,
        })
    }

    pub fn workspace(&self) -> &Workspace {
        &self.ws
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// True while a classifier update or tag write holds the writer lock.
    pub fn is_busy(&self) -> bool {
        matches!(self.writer.try_lock(), Err(TryLockError::WouldBlock))
    }

    fn publish(&self, s: Snapshot) {
        *self.snapshot.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(s);
    }

    fn entry(&self, patch_id: &str) -> ServiceResult<&crate::workspace::PatchEntry> {
        self.ws.patches.get(patch_id).ok_or_else(|| ServiceError::NotFound(format!("unknown patch {patch_id:?}")))
    }

    /// Retrains on all feedback under the held writer lock and commits.
    fn commit(&self, w: &mut Writer, new: Vec<FeedbackEvent>, steps: usize) -> ServiceResult<TrainOutcome> {
        let current = self.snapshot();
        let mut all = w.feedback.clone();
        all.extend(new.iter().cloned());
        let clf = train_merge(&current.classifier, &all, &self.ws, self.cfg.lr, steps)?;
        let loss = merge_loss(&clf, &all, &self.ws)?;
        let version = current.version + 1;
        let mut entries: Vec<Entry> = new.iter().cloned().map(|event| Entry::Feedback { event }).collect();
        entries.push(Entry::Commit { version, steps, lr: self.cfg.lr });
        w.journal.append(&entries)?;
        w.feedback = all;
        self.publish(snapshot_of(version, clf, &w.feedback));
        Ok(TrainOutcome { version, accepted: new.len(), feedback_count: w.feedback.len(), loss })
    }

    /// Validates a feedback batch, then retrains with the step budget.
    ///
    /// With `expected_version` set, the batch is refused with a conflict
    /// when another update landed first.
    pub fn feedback(&self, patch_id: &str, pixels: &[PixelLabel], expected_version: Option<u64>) -> ServiceResult<TrainOutcome> {
        let entry = self.entry(patch_id)?;
        if pixels.is_empty() {
            return Err(ServiceError::Invalid("feedback batch has no pixels".into()));
        }
        let num_classes = self.ws.initial_classifier.num_classes;
        let (w, h) = (entry.patch.width(), entry.patch.height());
        for (i, p) in pixels.iter().enumerate() {
            if p.row >= h || p.col >= w {
                return Err(ServiceError::Invalid(format!("pixel {i} ({}, {}) outside the {w}x{h} patch", p.row, p.col)));
            }
            if p.class_id >= num_classes {
                return Err(ServiceError::Invalid(format!("pixel {i}: unknown class {}", p.class_id)));
            }
        }
        let mut w = lock(&self.writer);
        if let Some(v) = expected_version {
            let current = self.snapshot().version;
            if v != current {
                return Err(ServiceError::Conflict(format!("classifier is at version {current}, not {v}")));
            }
        }
        let now = Utc::now();
        let events = pixels
            .iter()
            .map(|p| FeedbackEvent { patch_id: patch_id.to_string(), row: p.row, col: p.col, class_id: p.class_id, timestamp: Some(now) })
            .collect();
        self.commit(&mut w, events, self.cfg.step_budget)
    }

    /// Longer training pass over all feedback. Refuses to wait behind
    /// another update.
    pub fn retrain(&self, steps: Option<usize>) -> ServiceResult<TrainOutcome> {
        let steps = steps.unwrap_or(self.cfg.retrain_steps);
        if steps == 0 {
            return Err(ServiceError::Invalid("steps must be positive".into()));
        }
        let mut w = match self.writer.try_lock() {
            Ok(w) => w,
            Err(TryLockError::Poisoned(e)) => e.into_inner(),
            Err(TryLockError::WouldBlock) => {
                return Err(ServiceError::Conflict("another classifier update is in progress".into()))
            }
        };
        if w.feedback.is_empty() {
            return Err(ServiceError::Invalid("no feedback to train on".into()));
        }
        self.commit(&mut w, Vec::new(), steps)
    }

    pub fn tag(&self, prediction_id: &str, tag: ValidationTag, annotator: Option<String>) -> ServiceResult<ValidationTally> {
        if self.ws.prediction(prediction_id).is_none() {
            return Err(ServiceError::NotFound(format!("unknown prediction {prediction_id:?}")));
        }
        let record = TagRecord { prediction_id: prediction_id.to_string(), tag, annotator, timestamp: Utc::now() };
        let mut w = lock(&self.writer);
        w.journal.append(&[Entry::Tag(record.clone())])?;
        self.tags.write().unwrap_or_else(|e| e.into_inner()).insert(record.prediction_id.clone(), record);
        Ok(self.tally())
    }

    /// Latest tag per prediction.
    pub fn tally(&self) -> ValidationTally {
        validation_tally(self.tags.read().unwrap_or_else(|e| e.into_inner()).values().map(|t| t.tag))
    }

    pub fn queue(&self) -> Vec<QueueItem> {
        let tags = self.tags.read().unwrap_or_else(|e| e.into_inner());
        self.ws
            .predictions
            .iter()
            .map(|p| QueueItem { prediction: p.clone(), tag: tags.get(&p.prediction_id).map(|t| t.tag) })
            .collect()
    }

    pub fn rgb_png(&self, patch_id: &str, bands: Option<[usize; 3]>, low: f64, high: f64) -> ServiceResult<Vec<u8>> {
        let entry = self.entry(patch_id)?;
        let bands = bands.unwrap_or(TRUE_COLOR);
        if bands.iter().any(|&b| b >= BAND_COUNT) {
            return Err(ServiceError::Invalid(format!("band indices must be below {BAND_COUNT}")));
        }
        if !(0.0..=100.0).contains(&low) || !(0.0..=100.0).contains(&high) || low >= high {
            return Err(ServiceError::Invalid(format!("stretch percentiles {low}..{high} are invalid")));
        }
        Ok(encode_png(&render_rgb(&entry.patch, bands, low, high))?)
    }

    /// Colour-coded cluster or class map and the classifier version it shows.
    pub fn overlay_png(&self, patch_id: &str, layer: OverlayLayer) -> ServiceResult<(u64, Vec<u8>)> {
        let entry = self.entry(patch_id)?;
        let snap = self.snapshot();
        let img = match layer {
            OverlayLayer::Clusters => render_ids(&entry.clusters.ids, cluster_color),
            OverlayLayer::Classes => render_ids(&class_map(&entry.clusters, &snap.classifier)?, class_color),
        };
        Ok((snap.version, encode_png(&img)?))
    }

    /// Writes weak-label masks for every patch at the current version.
    pub fn export(&self) -> ServiceResult<ExportManifest> {
        let _guard = lock(&self.exporting);
        let snap = self.snapshot();
        let dir = self.ws.export_dir();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut files = Vec::new();
        for (id, entry) in &self.ws.patches {
            let mask = render_weak_labels(&entry.clusters, &snap.classifier)?;
            let name = format!("{id}.rgrid");
            let path = dir.join(&name);
            write_mask(&mask, &path)?;
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            files.push(ExportedFile {
                patch_id: id.clone(),
                path: format!("{EXPORT_DIR}/{name}"),
                positive_pixels: mask.count_positive(),
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
        let manifest = ExportManifest { classifier_version: snap.version, files };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}
