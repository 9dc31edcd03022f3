//! Weak-label generation: spectral clustering, the user-tuned merge
//! classifier, and dataset assembly.

mod dataset;
mod kmeans;
mod merge;

pub use dataset::{assemble_dataset, split_sizes, DatasetSplit};
pub use kmeans::{assign_clusters, fit_clusters, sample_pixels, ClusterMap, ClusterModel, FitTrace, KMeansParams};
pub use merge::{
    class_map, feedback_counts, merge_loss, render_weak_labels, train_merge, ClusterLookup, FeedbackEvent,
    MergeClassifier, DEFAULT_MERGE_LR,
};
