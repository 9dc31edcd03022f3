//! Evaluation: pixel and farm metrics, correlation, land-cover
//! cross-tabulation, validation tallies and their report tables.

mod correlation;
mod crosstab;
mod metrics;
mod report;
mod validation;

pub use correlation::{pearson, CorrelationReport};
pub use crosstab::{landcover_crosstab, CrossTab, CrossTabRow, YearFilter};
pub use metrics::{farm_recall, segmentation_metrics, ConfusionCounts, MeanAccuracy, MetricsReport, DEFAULT_MIN_OVERLAP};
pub use report::{correlation_table, crosstab_table, metrics_table, validation_table};
pub use validation::{validation_tally, ValidationTag, ValidationTally};
