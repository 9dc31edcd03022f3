use serde::{Deserialize, Serialize};

use crate::raster::LabelMask;
use crate::vector::{intersection_area, Polygon};
use crate::{Error, Result};

pub const DEFAULT_MIN_OVERLAP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn from_masks(pred: &LabelMask, gt: &LabelMask) -> Result<Self> {
        if pred.width() != gt.width() || pred.height() != gt.height() {
            return Err(Error::Dimension(format!(
                "prediction is {}x{}, ground truth {}x{}",
                pred.width(),
                pred.height(),
                gt.width(),
                gt.height()
            )));
        }
        let mut c = ConfusionCounts::default();
        for (&p, &g) in pred.grid().data().iter().zip(gt.grid().data()) {
            match (p != 0, g != 0) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Adds counts of another tile; metrics over a test set pool pixels.
    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    fn positive_absent(&self) -> bool {
        self.tp + self.fp + self.fn_ == 0
    }

    fn negative_absent(&self) -> bool {
        self.tn + self.fp + self.fn_ == 0
    }

    /// `num/den` as a percentage; an empty denominator is 100 when the
    /// class it counts is absent from both masks, otherwise 0.
    fn pct(num: u64, den: u64, absent: bool) -> f64 {
        if den == 0 {
            if absent {
                100.0
            } else {
                0.0
            }
        } else {
            100.0 * num as f64 / den as f64
        }
    }

    pub fn iou(&self) -> f64 {
        Self::pct(self.tp, self.tp + self.fp + self.fn_, self.positive_absent())
    }

    pub fn precision(&self) -> f64 {
        Self::pct(self.tp, self.tp + self.fp, self.positive_absent())
    }

    pub fn recall(&self) -> f64 {
        Self::pct(self.tp, self.tp + self.fn_, self.positive_absent())
    }

    /// Accuracy on ground-truth negatives.
    pub fn specificity(&self) -> f64 {
        Self::pct(self.tn, self.tn + self.fp, self.negative_absent())
    }

    pub fn mean_accuracy(&self, how: MeanAccuracy) -> f64 {
        match how {
            MeanAccuracy::Balanced => (self.recall() + self.specificity()) / 2.0,
            MeanAccuracy::Overall => Self::pct(self.tp + self.tn, self.total(), true),
        }
    }
}

/// How the "mean accuracy" column is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanAccuracy {
    /// Average of positive-class and negative-class accuracy.
    #[default]
    Balanced,
    /// Fraction of all pixels classified correctly.
    Overall,
}

/// Percentages; `farm_recall` is `None` when only pixel metrics were computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub iou: f64,
    pub mean_acc: f64,
    pub pix_recall: f64,
    pub pix_precision: f64,
    pub farm_recall: Option<f64>,
    pub counts: ConfusionCounts,
}

impl MetricsReport {
    pub fn from_counts(counts: ConfusionCounts, how: MeanAccuracy) -> Self {
        MetricsReport {
            iou: counts.iou(),
            mean_acc: counts.mean_accuracy(how),
            pix_recall: counts.recall(),
            pix_precision: counts.precision(),
            farm_recall: None,
            counts,
        }
    }
}

pub fn segmentation_metrics(pred: &LabelMask, gt: &LabelMask, how: MeanAccuracy) -> Result<MetricsReport> {
    Ok(MetricsReport::from_counts(ConfusionCounts::from_masks(pred, gt)?, how))
}

/// Percentage of ground-truth farms covered by predictions over at least
/// `min_overlap_frac` of their area. Both sets must share a CRS.
///
/// Overlaps with separate predictions add up; predictions are assumed not
/// to overlap each other, which holds for polygonized masks.
pub fn farm_recall(pred: &[Polygon], gt: &[Polygon], min_overlap_frac: f64) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::Argument("farm recall needs at least one ground-truth farm".into()));
    }
    if !(0.0..=1.0).contains(&min_overlap_frac) {
        return Err(Error::Argument(format!("min_overlap_frac {min_overlap_frac} outside [0, 1]")));
    }
    let detected = gt
        .iter()
        .filter(|g| {
            let area = g.area();
            let gb = g.bbox();
            let covered: f64 = pred
                .iter()
                .filter(|p| p.bbox().distance(&gb) == 0.0)
                .map(|p| intersection_area(p, g))
                .sum();
            area > 0.0 && covered > 0.0 && covered / area >= min_overlap_frac
        })
        .count();
    Ok(100.0 * detected as f64 / gt.len() as f64)
}
