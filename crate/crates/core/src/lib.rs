//! Weakly supervised mapping of utility-scale solar farms from multispectral
//! Sentinel-2 patches.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! * [`raster`]: georeferenced grids, rgrid/GeoTIFF I/O, spectral indices,
//!   histogram matching and RGB rendering.
//! * [`vector`]: polygon geometry and GeoJSON I/O.
//! * [`weaklabel`]: spectral k-means, the cluster→class merge classifier
//!   fine-tuned from user feedback, and train/val/test splitting.
//! * [`segmodel`]: per-pixel logistic segmentation trained with weighted BCE
//!   and Adam, plus hard negative mining.
//! * [`postvec`]: index/road filtering, polygonization, farm grouping and
//!   export.
//! * [`tcm`]: temporal cluster matching to date construction.
//! * [`analysis`]: evaluation metrics and report tables.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the types used by the command line tools.

pub mod analysis;
pub mod crs;
mod error;
pub mod postvec;
pub mod raster;
mod scalar;
pub mod segmodel;
pub mod tcm;
pub mod vector;
pub mod weaklabel;

pub use error::{Error, Result};
pub use scalar::{cast, Scalar};

/// Reflectance patch as stored on disk.
pub type Patch = raster::RasterPatch<f32>;
/// Scalar grid of reflectance-like values.
pub type Grid32 = raster::Grid<f32>;
/// Cluster model over `f32` reflectance.
pub type ClusterModel = weaklabel::ClusterModel<f32>;
/// Merge classifier with `f64` weights.
pub type MergeClassifier = weaklabel::MergeClassifier<f64>;
/// Segmentation model with `f64` weights.
pub type SegModel = segmodel::SegModel<f64>;
/// Correlation report in `f64`.
pub type CorrelationReport = analysis::CorrelationReport<f64>;
/// KL divergence series in `f64`.
pub type KlSeries = tcm::KlSeries<f64>;
