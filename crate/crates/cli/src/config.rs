//! Pipeline configuration: one TOML file with a section per stage.
//!
//! Every section rejects unknown keys and every field has a default, so an
//! empty file is a valid configuration. Paths in `[paths]` are relative to
//! the directory holding the file.

use std::path::{Path, PathBuf};

use heliomap::analysis::MeanAccuracy;
use heliomap::postvec::{FilterConfig, DEFAULT_GROUP_DISTANCE_M};
use heliomap::segmodel::{FeatureConfig, HnmConfig, TrainConfig};
use heliomap::tcm::TcmConfig;
use heliomap::weaklabel::{split_sizes, KMeansParams};
use heliomap_service::ServiceConfig;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub patches: Option<PathBuf>,
    pub masks: Option<PathBuf>,
    /// Scenes known to contain no solar farms, for hard negative mining.
    pub negatives: Option<PathBuf>,
    pub roads: Option<PathBuf>,
    pub states: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterStage {
    pub k: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    /// Pixels drawn from each patch to fit the centroids.
    pub samples_per_patch: usize,
}

impl Default for ClusterStage {
    fn default() -> Self {
        let p = KMeansParams::default();
        ClusterStage { k: p.k, max_iter: p.max_iter, tol: p.tol, seed: p.seed, samples_per_patch: 2000 }
    }
}

impl ClusterStage {
    pub fn params(&self) -> KMeansParams {
        KMeansParams { k: self.k, seed: self.seed, max_iter: self.max_iter, tol: self.tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetStage {
    /// Train, validation and test shares.
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl Default for DatasetStage {
    fn default() -> Self {
        DatasetStage { ratios: [0.8, 0.1, 0.1], seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferStage {
    /// Overrides the threshold stored in the model.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HnmStage {
    pub window: usize,
    pub stride: usize,
    pub min_positive: usize,
    pub max_patches: usize,
    pub rounds: usize,
    /// Every n-th mined window is held out for validation; 0 holds none.
    pub holdout_every: usize,
    /// Retraining epochs per round; `[train] epochs` when unset.
    pub epochs: Option<usize>,
}

impl Default for HnmStage {
    fn default() -> Self {
        let h = HnmConfig::default();
        HnmStage {
            window: h.window,
            stride: h.stride,
            min_positive: h.min_positive,
            max_patches: h.max_patches,
            rounds: 1,
            holdout_every: 4,
            epochs: None,
        }
    }
}

impl HnmStage {
    pub fn mining(&self) -> HnmConfig {
        HnmConfig { window: self.window, stride: self.stride, min_positive: self.min_positive, max_patches: self.max_patches }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FarmsStage {
    /// Polygons closer than this belong to the same farm.
    pub distance_m: f64,
}

impl Default for FarmsStage {
    fn default() -> Self {
        FarmsStage { distance_m: DEFAULT_GROUP_DISTANCE_M }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsStage {
    pub mean_acc: MeanAccuracy,
    /// Fraction of a reference farm that must be covered to count as found.
    pub min_overlap: f64,
}

impl Default for MetricsStage {
    fn default() -> Self {
        MetricsStage { mean_acc: MeanAccuracy::default(), min_overlap: heliomap::analysis::DEFAULT_MIN_OVERLAP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeStage {
    pub host: String,
    pub port: u16,
    pub step_budget: usize,
    pub retrain_steps: usize,
    pub lr: f64,
}

impl Default for ServeStage {
    fn default() -> Self {
        let s = ServiceConfig::default();
        ServeStage {
            host: "127.0.0.1".into(),
            port: 8080,
            step_budget: s.step_budget,
            retrain_steps: s.retrain_steps,
            lr: s.lr,
        }
    }
}

impl ServeStage {
    pub fn service(&self) -> ServiceConfig {
        ServiceConfig { step_budget: self.step_budget, retrain_steps: self.retrain_steps, lr: self.lr }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Replaces every stage seed when set.
    pub seed: Option<u64>,
    pub paths: Paths,
    pub cluster: ClusterStage,
    pub dataset: DatasetStage,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub infer: InferStage,
    pub hnm: HnmStage,
    pub filter: FilterConfig,
    pub farms: FarmsStage,
    pub tcm: TcmConfig,
    pub metrics: MetricsStage,
    pub serve: ServeStage,
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> CliResult<()> {
    if ok {
        Ok(())
    } else {
        Err(CliError::invalid(msg()))
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::invalid(format!("config: {}", e.to_string().trim_end())))
    }

    /// Reads and validates a config file, resolving `[paths]` against its
    /// directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let p = &mut cfg.paths;
        for slot in [&mut p.patches, &mut p.masks, &mut p.negatives, &mut p.roads, &mut p.states, &mut p.out] {
            if let Some(rel) = slot.as_ref().filter(|r| r.is_relative()) {
                *slot = Some(base.join(rel));
            }
        }
        Ok(cfg)
    }

    /// Command-line seed, else the top-level seed, else each stage's own.
    pub fn apply_seed(&mut self, flag: Option<u64>) {
        if let Some(s) = flag.or(self.seed) {
            self.seed = Some(s);
            self.cluster.seed = s;
            self.dataset.seed = s;
            self.train.seed = s;
            self.tcm.seed = s;
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let c = &self.cluster;
        check(c.k >= 1, || "cluster.k must be at least 1".into())?;
        check(c.max_iter >= 1, || "cluster.max_iter must be at least 1".into())?;
        check(c.tol >= 0.0 && c.tol.is_finite(), || format!("cluster.tol must be non-negative, got {}", c.tol))?;
        check(c.samples_per_patch >= 1, || "cluster.samples_per_patch must be at least 1".into())?;
        split_sizes(0, self.dataset.ratios).map_err(|e| CliError::invalid(format!("dataset.ratios: {e}")))?;
        self.train.validate().map_err(|e| CliError::invalid(format!("train: {e}")))?;
        check(self.train.epochs >= 1, || "train.epochs must be at least 1".into())?;
        if let Some(t) = self.infer.threshold {
            check(t > 0.0 && t < 1.0, || format!("infer.threshold must be in (0, 1), got {t}"))?;
        }
        let h = &self.hnm;
        check(h.window >= 1 && h.stride >= 1, || "hnm.window and hnm.stride must be positive".into())?;
        check(h.max_patches >= 1, || "hnm.max_patches must be at least 1".into())?;
        check(h.rounds >= 1, || "hnm.rounds must be at least 1".into())?;
        check(h.epochs != Some(0), || "hnm.epochs must be at least 1".into())?;
        self.filter.validate().map_err(|e| CliError::invalid(format!("filter: {e}")))?;
        let d = self.farms.distance_m;
        check(d > 0.0 && d.is_finite(), || format!("farms.distance_m must be positive, got {d}"))?;
        let t = &self.tcm;
        check(t.k >= 2, || format!("tcm.k must be at least 2, got {}", t.k))?;
        check(t.ring_radius_px >= 1, || "tcm.ring_radius_px must be at least 1".into())?;
        check(t.max_iter >= 1, || "tcm.max_iter must be at least 1".into())?;
        let m = self.metrics.min_overlap;
        check((0.0..=1.0).contains(&m), || format!("metrics.min_overlap must be in [0, 1], got {m}"))?;
        self.serve.service().validate().map_err(|e| CliError::invalid(format!("serve: {e}")))?;
        Ok(())
    }
}
