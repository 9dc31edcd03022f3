use std::collections::{BTreeMap, HashMap};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::ClusterMap;
use crate::raster::{Grid, LabelMask};
use crate::{Error, Result, Scalar};

/// Step size for [`train_merge`]. The mean cross-entropy over one-hot
/// inputs plus bias has a gradient Lipschitz constant of at most 1, so any
/// step below 2 keeps full-batch descent monotone.
pub const DEFAULT_MERGE_LR: f64 = 0.5;

/// Linear cluster-to-class head over one-hot cluster ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeClassifier<T> {
    pub num_classes: usize,
    pub k: usize,
    /// Row-major `num_classes × k`.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub solar_class_id: usize,
    pub class_names: Vec<String>,
}

impl<T: Scalar> MergeClassifier<T> {
    /// All-zero head. Every cluster scores every class equally.
    pub fn zeroed(k: usize, class_names: Vec<String>, solar_class_id: usize) -> Result<Self> {
        let c = class_names.len();
        if c < 2 {
            return Err(Error::Argument("need at least two classes".into()));
        }
        if k < 2 {
            return Err(Error::Argument("need at least two clusters".into()));
        }
        if solar_class_id >= c {
            return Err(Error::Argument(format!("solar class {solar_class_id} out of range for {c} classes")));
        }
        Ok(MergeClassifier {
            num_classes: c,
            k,
            weights: vec![T::zero(); c * k],
            bias: vec![T::zero(); c],
            solar_class_id,
            class_names,
        })
    }

    /// Background, solar, other.
    pub fn default_classes(k: usize) -> Self {
        Self::zeroed(k, vec!["background".into(), "solar".into(), "other".into()], 1).expect("valid defaults")
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.num_classes;
        if self.weights.len() != c * self.k || self.bias.len() != c || self.class_names.len() != c {
            return Err(Error::Dimension("merge classifier shape is inconsistent".into()));
        }
        if self.solar_class_id >= c {
            return Err(Error::Argument("solar class out of range".into()));
        }
        if self.weights.iter().chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::Argument("merge classifier weights must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn score(&self, class: usize, cluster: usize) -> T {
        self.weights[class * self.k + cluster] + self.bias[class]
    }

    pub fn scores(&self, cluster: usize) -> Vec<T> {
        (0..self.num_classes).map(|c| self.score(c, cluster)).collect()
    }

    pub fn posterior(&self, cluster: usize) -> Vec<T> {
        softmax(&self.scores(cluster))
    }

    /// Highest scoring class; ties go to the lowest id.
    pub fn predict_class(&self, cluster: usize) -> usize {
        let mut best = 0;
        for c in 1..self.num_classes {
            if self.score(c, cluster) > self.score(best, cluster) {
                best = c;
            }
        }
        best
    }

    /// Solar only when it strictly beats every other class.
    pub fn is_solar(&self, cluster: usize) -> bool {
        let s = self.score(self.solar_class_id, cluster);
        (0..self.num_classes).filter(|&c| c != self.solar_class_id).all(|c| s > self.score(c, cluster))
    }

    pub fn scaled(&self, factor: T) -> Self {
        let mut out = self.clone();
        out.weights.iter_mut().chain(out.bias.iter_mut()).for_each(|v| *v *= factor);
        out
    }
}

fn softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let m = z.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = z.iter().map(|&v| (v - m).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// One user label on one pixel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub patch_id: String,
    pub row: usize,
    pub col: usize,
    pub class_id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
}

/// Resolves patch ids to their cluster maps.
pub trait ClusterLookup {
    fn cluster_map(&self, patch_id: &str) -> Option<&ClusterMap>;
}

impl ClusterLookup for HashMap<String, ClusterMap> {
    fn cluster_map(&self, patch_id: &str) -> Option<&ClusterMap> {
        self.get(patch_id)
    }
}

impl ClusterLookup for BTreeMap<String, ClusterMap> {
    fn cluster_map(&self, patch_id: &str) -> Option<&ClusterMap> {
        self.get(patch_id)
    }
}

/// `k × C` table of how often each cluster was labelled with each class.
pub fn feedback_counts<T: Scalar>(
    clf: &MergeClassifier<T>,
    feedback: &[FeedbackEvent],
    lookup: &dyn ClusterLookup,
) -> Result<Vec<Vec<usize>>> {
    let mut counts = vec![vec![0usize; clf.num_classes]; clf.k];
    for ev in feedback {
        let map = lookup
            .cluster_map(&ev.patch_id)
            .ok_or_else(|| Error::Argument(format!("no cluster map for patch {:?}", ev.patch_id)))?;
        if map.k != clf.k {
            return Err(Error::Dimension(format!("cluster map has k = {}, classifier has {}", map.k, clf.k)));
        }
        if !map.ids.contains(ev.row, ev.col) {
            return Err(Error::Argument(format!("pixel ({}, {}) outside patch {:?}", ev.row, ev.col, ev.patch_id)));
        }
        if ev.class_id >= clf.num_classes {
            return Err(Error::Argument(format!("class {} out of range", ev.class_id)));
        }
        counts[map.get(ev.row, ev.col)][ev.class_id] += 1;
    }
    Ok(counts)
}

fn loss_and_grad<T: Scalar>(clf: &MergeClassifier<T>, counts: &[Vec<usize>], total: usize) -> (f64, Vec<f64>, Vec<f64>) {
    let (c_n, k) = (clf.num_classes, clf.k);
    let mut gw = vec![0.0; c_n * k];
    let mut gb = vec![0.0; c_n];
    let mut loss = 0.0;
    let n = total as f64;
    for (j, row) in counts.iter().enumerate() {
        let nj: usize = row.iter().sum();
        if nj == 0 {
            continue;
        }
        let z: Vec<f64> = (0..c_n).map(|c| clf.score(c, j).as_f64()).collect();
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        for c in 0..c_n {
            let p = (z[c] - lse).exp();
            let g = (nj as f64 * p - row[c] as f64) / n;
            gw[c * k + j] += g;
            gb[c] += g;
            loss -= row[c] as f64 * (z[c] - lse) / n;
        }
    }
    (loss, gw, gb)
}

/// Mean softmax cross-entropy of the classifier on the feedback.
pub fn merge_loss<T: Scalar>(clf: &MergeClassifier<T>, feedback: &[FeedbackEvent], lookup: &dyn ClusterLookup) -> Result<f64> {
    if feedback.is_empty() {
        return Ok(0.0);
    }
    let counts = feedback_counts(clf, feedback, lookup)?;
    Ok(loss_and_grad(clf, &counts, feedback.len()).0)
}

/// Full-batch gradient descent on the mean cross-entropy of all feedback.
pub fn train_merge<T: Scalar>(
    clf: &MergeClassifier<T>,
    feedback: &[FeedbackEvent],
    lookup: &dyn ClusterLookup,
    lr: f64,
    steps: usize,
) -> Result<MergeClassifier<T>> {
    clf.validate()?;
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::Argument(format!("learning rate must be positive, got {lr}")));
    }
    if feedback.is_empty() || steps == 0 {
        return Ok(clf.clone());
    }
    let counts = feedback_counts(clf, feedback, lookup)?;
    let mut out = clf.clone();
    for _ in 0..steps {
        let (_, gw, gb) = loss_and_grad(&out, &counts, feedback.len());
        for (w, g) in out.weights.iter_mut().zip(&gw) {
            *w -= T::lit(lr * g);
        }
        for (b, g) in out.bias.iter_mut().zip(&gb) {
            *b -= T::lit(lr * g);
        }
    }
    Ok(out)
}

fn check_k<T: Scalar>(map: &ClusterMap, clf: &MergeClassifier<T>) -> Result<()> {
    if map.k != clf.k {
        return Err(Error::Dimension(format!("cluster map has k = {}, classifier has {}", map.k, clf.k)));
    }
    Ok(())
}

/// Binary solar mask. Ties between solar and another class stay 0.
pub fn render_weak_labels<T: Scalar>(map: &ClusterMap, clf: &MergeClassifier<T>) -> Result<LabelMask> {
    check_k(map, clf)?;
    let table: Vec<u8> = (0..clf.k).map(|j| clf.is_solar(j) as u8).collect();
    LabelMask::new(map.ids.map(|id| table[id as usize]), map.transform)
}

/// Argmax class per pixel.
pub fn class_map<T: Scalar>(map: &ClusterMap, clf: &MergeClassifier<T>) -> Result<Grid<u8>> {
    check_k(map, clf)?;
    if clf.num_classes > u8::MAX as usize + 1 {
        return Err(Error::Argument("too many classes for u8 ids".into()));
    }
    let table: Vec<u8> = (0..clf.k).map(|j| clf.predict_class(j) as u8).collect();
    Ok(map.ids.map(|id| table[id as usize]))
}
