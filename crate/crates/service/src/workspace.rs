//! On-disk layout the service works over.
//!
//! ```text
//! <root>/clusters.json        fitted cluster model (required)
//! <root>/patches/*.rgrid|tif  reflectance patches, id = file stem (required)
//! <root>/merge.json           starting merge classifier (optional)
//! <root>/predictions.geojson  farms to review in validation mode (optional)
//! <root>/journal.jsonl        feedback and tag journal (created on demand)
//! <root>/weak_labels/         export target
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use heliomap::raster::{read_raster, RasterFormat};
use heliomap::vector::read_geojson;
use heliomap::weaklabel::{assign_clusters, ClusterLookup, ClusterMap};
use heliomap::{ClusterModel, Error, MergeClassifier, Patch, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const CLUSTERS_FILE: &str = "clusters.json";
pub const PATCH_DIR: &str = "patches";
pub const MERGE_FILE: &str = "merge.json";
pub const PREDICTIONS_FILE: &str = "predictions.geojson";
pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const EXPORT_DIR: &str = "weak_labels";

pub struct PatchEntry {
    pub patch: Patch,
    pub clusters: ClusterMap,
}

/// One predicted farm awaiting review.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub prediction_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub longitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
}

pub struct Workspace {
    pub root: PathBuf,
    pub cluster_model: ClusterModel,
    pub initial_classifier: MergeClassifier,
    pub patches: BTreeMap<String, PatchEntry>,
    pub predictions: Vec<Prediction>,
    /// SHA-256 over the read-only inputs (not the journal).
    pub digest: String,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn patch_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() || RasterFormat::from_path(&path).is_err() {
            continue;
        }
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        out.push((id, path));
    }
    out.sort();
    if let Some(w) = out.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Argument(format!("two patch files share the id {:?}", w[0].0)));
    }
    Ok(out)
}

fn prediction_id(props: &serde_json::Map<String, Value>, index: usize) -> String {
    match props.get("fid").or_else(|| props.get("id")) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => index.to_string(),
    }
}

/// Farms keyed by fid; the polygons of a multi-part farm collapse to one entry.
fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let fc = read_geojson(path)?;
    let mut out: Vec<Prediction> = Vec::new();
    for (i, f) in fc.features.iter().enumerate() {
        let id = prediction_id(&f.properties, i);
        if out.iter().any(|p| p.prediction_id == id) {
            continue;
        }
        let num = |k: &str| f.properties.get(k).and_then(Value::as_f64);
        out.push(Prediction {
            prediction_id: id,
            longitude: num("Longitude"),
            latitude: num("Latitude"),
            area: num("Area"),
            state: f.properties.get("State").and_then(Value::as_str).map(str::to_string),
        });
    }
    Ok(out)
}

impl Workspace {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let mut hasher = Sha256::new();
        let mut hash_file = |name: &str, bytes: &[u8]| {
            hasher.update((name.len() as u64).to_le_bytes());
            hasher.update(name.as_bytes());
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(bytes);
        };

        let bytes = read(&root.join(CLUSTERS_FILE))?;
        hash_file(CLUSTERS_FILE, &bytes);
        let cluster_model: ClusterModel =
            serde_json::from_slice(&bytes).map_err(|e| Error::Parse(format!("{CLUSTERS_FILE}: {e}")))?;
        if cluster_model.k < 2 || cluster_model.centroids.len() != cluster_model.k * cluster_model.dim {
            return Err(Error::Dimension(format!("{CLUSTERS_FILE}: inconsistent centroid table")));
        }

        let merge_path = root.join(MERGE_FILE);
        let initial_classifier = if merge_path.exists() {
            let bytes = read(&merge_path)?;
            hash_file(MERGE_FILE, &bytes);
            let clf: MergeClassifier =
                serde_json::from_slice(&bytes).map_err(|e| Error::Parse(format!("{MERGE_FILE}: {e}")))?;
            clf.validate()?;
            if clf.k != cluster_model.k {
                return Err(Error::Dimension(format!(
                    "{MERGE_FILE} has k = {}, cluster model has {}",
                    clf.k, cluster_model.k
                )));
            }
            clf
        } else {
            MergeClassifier::default_classes(cluster_model.k)
        };

        let mut patches = BTreeMap::new();
        for (id, path) in patch_files(&root.join(PATCH_DIR))? {
            hash_file(&format!("{PATCH_DIR}/{id}"), &read(&path)?);
            let patch: Patch = read_raster(&path, RasterFormat::from_path(&path)?)?;
            let clusters = assign_clusters(&patch, &cluster_model)?;
            patches.insert(id, PatchEntry { patch, clusters });
        }
        if patches.is_empty() {
            return Err(Error::Argument(format!("no patches under {}", root.join(PATCH_DIR).display())));
        }

        let pred_path = root.join(PREDICTIONS_FILE);
        let predictions = if pred_path.exists() {
            hash_file(PREDICTIONS_FILE, &read(&pred_path)?);
            load_predictions(&pred_path)?
        } else {
            Vec::new()
        };

        Ok(Workspace {
            root,
            cluster_model,
            initial_classifier,
            patches,
            predictions,
            digest: hex::encode(hasher.finalize()),
        })
    }

    pub fn journal_path(&self) -> PathBuf {
        self.root.join(JOURNAL_FILE)
    }

    pub fn export_dir(&self) -> PathBuf {
        self.root.join(EXPORT_DIR)
    }

    pub fn prediction(&self, id: &str) -> Option<&Prediction> {
        self.predictions.iter().find(|p| p.prediction_id == id)
    }
}

impl ClusterLookup for Workspace {
    fn cluster_map(&self, patch_id: &str) -> Option<&ClusterMap> {
        self.patches.get(patch_id).map(|p| &p.clusters)
    }
}
