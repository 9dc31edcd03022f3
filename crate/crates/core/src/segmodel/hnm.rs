use serde::{Deserialize, Serialize};

use super::{predict, PixelModel, TrainingPair};
use crate::raster::{LabelMask, RasterPatch};
use crate::{Error, Result, Scalar};

/// A scene attested to contain no solar installations.
#[derive(Debug, Clone, PartialEq)]
pub struct HnmScene<T> {
    pub id: String,
    pub patch: RasterPatch<T>,
    pub solar_free: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HnmConfig {
    /// Side of the extracted sub-patches.
    pub window: usize,
    pub stride: usize,
    /// Windows need more than this many predicted positives.
    pub min_positive: usize,
    pub max_patches: usize,
}

impl Default for HnmConfig {
    fn default() -> Self {
        HnmConfig { window: 256, stride: 128, min_positive: 0, max_patches: 50 }
    }
}

/// A false-positive window with its all-zero label.
#[derive(Debug, Clone, PartialEq)]
pub struct HardNegative<T> {
    pub scene_id: String,
    pub row: usize,
    pub col: usize,
    pub positives: usize,
    pub patch: RasterPatch<T>,
    pub mask: LabelMask,
}

impl<T: Scalar> HardNegative<T> {
    /// `scene@row,col`, unique within one mining round.
    pub fn id(&self) -> String {
        format!("{}@{},{}", self.scene_id, self.row, self.col)
    }

    pub fn to_pair(&self) -> TrainingPair<T> {
        TrainingPair { id: self.id(), patch: self.patch.clone(), mask: self.mask.clone() }
    }
}

/// Splits mined windows into extra train and validation pairs.
///
/// Every `holdout_every`-th window by rank goes to validation (0 keeps all
/// for training). Without held-out negatives the best-validation rule
/// tends to return the pre-mining weights, because the old validation
/// split never contains the false positives being corrected.
pub fn hard_negative_pairs<T: Scalar>(
    mined: &[HardNegative<T>],
    holdout_every: usize,
) -> (Vec<TrainingPair<T>>, Vec<TrainingPair<T>>) {
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (i, h) in mined.iter().enumerate() {
        if holdout_every > 0 && (i + 1) % holdout_every == 0 {
            val.push(h.to_pair());
        } else {
            train.push(h.to_pair());
        }
    }
    (train, val)
}

/// Summed-area table with a zero border: `(h + 1) × (w + 1)`.
fn integral(mask: &LabelMask) -> Vec<usize> {
    let (w, h) = (mask.width(), mask.height());
    let mut s = vec![0usize; (w + 1) * (h + 1)];
    for r in 0..h {
        let mut run = 0;
        for c in 0..w {
            run += mask.get(r, c) as usize;
            s[(r + 1) * (w + 1) + c + 1] = s[r * (w + 1) + c + 1] + run;
        }
    }
    s
}

fn window_starts(len: usize, win: usize, stride: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=len - win).step_by(stride).collect();
    if *v.last().unwrap() != len - win {
        v.push(len - win);
    }
    v
}

/// Windows of solar-free scenes where the model fires, most positives first.
///
/// Every window position on the stride grid (plus the last row/column
/// flush with the edge) is scored with a summed-area table. Windows are
/// taken greedily by count; a window overlapping one already taken in the
/// same scene is skipped. Ties go to the earlier scene, then raster order.
pub fn mine_hard_negatives<T: Scalar, M: PixelModel<T>>(
    model: &M,
    scenes: &[HnmScene<T>],
    cfg: &HnmConfig,
) -> Result<Vec<HardNegative<T>>> {
    if cfg.window == 0 || cfg.stride == 0 {
        return Err(Error::Argument("window and stride must be positive".into()));
    }
    if let Some(s) = scenes.iter().find(|s| !s.solar_free) {
        return Err(Error::Argument(format!("scene {:?} is not attested solar-free", s.id)));
    }
    // (count, scene, row, col, win_w, win_h)
    let mut candidates = Vec::new();
    for (si, scene) in scenes.iter().enumerate() {
        let (w, h) = (scene.patch.width(), scene.patch.height());
        let (ww, wh) = (cfg.window.min(w), cfg.window.min(h));
        let mask = predict(model, &scene.patch).1;
        if mask.count_positive() <= cfg.min_positive {
            continue;
        }
        let s = integral(&mask);
        let at = |r: usize, c: usize| s[r * (w + 1) + c];
        for r in window_starts(h, wh, cfg.stride) {
            for c in window_starts(w, ww, cfg.stride) {
                let n = at(r + wh, c + ww) + at(r, c) - at(r, c + ww) - at(r + wh, c);
                if n > cfg.min_positive {
                    candidates.push((n, si, r, c, ww, wh));
                }
            }
        }
    }
    candidates.sort_by(|a, b| b.0.cmp(&a.0).then((a.1, a.2, a.3).cmp(&(b.1, b.2, b.3))));

    let mut taken: Vec<(usize, usize, usize, usize, usize, usize)> = Vec::new();
    for cand in candidates {
        if taken.len() >= cfg.max_patches {
            break;
        }
        let (_, si, r, c, ww, wh) = cand;
        let overlaps = taken.iter().any(|t| t.1 == si && r < t.2 + t.5 && t.2 < r + wh && c < t.3 + t.4 && t.3 < c + ww);
        if !overlaps {
            taken.push(cand);
        }
    }
    Ok(taken
        .into_iter()
        .map(|(n, si, r, c, ww, wh)| {
            let patch = scenes[si].patch.crop(c, r, ww, wh);
            let mask = LabelMask::zeros(ww, wh, *patch.transform());
            HardNegative { scene_id: scenes[si].id.clone(), row: r, col: c, positives: n, patch, mask }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoTransform;
    use crate::segmodel::{FeatureConfig, SegModel};

    /// Fires on band 0 above 0.5.
    fn band0_model() -> SegModel<f64> {
        let mut m = SegModel::zeros(FeatureConfig { radius: 0, ..Default::default() });
        m.weights[0] = 100.0;
        m.bias = -50.0;
        m
    }

    fn scene(id: &str, w: usize, h: usize, blobs: &[(usize, usize, usize)]) -> HnmScene<f64> {
        let t = GeoTransform::north_up(0.0, 0.0, 10.0, 32643);
        let mut p = RasterPatch::uniform(w, h, [0.1; 12], t).unwrap();
        for &(r0, c0, size) in blobs {
            for r in r0..r0 + size {
                for c in c0..c0 + size {
                    let mut px = p.pixel(r, c);
                    px[0] = 0.9;
                    p.set_pixel(r, c, &px);
                }
            }
        }
        HnmScene { id: id.into(), patch: p, solar_free: true }
    }

    /// Largest count over every window position.
    fn brute_max(scene: &HnmScene<f64>, model: &SegModel<f64>, win: usize) -> usize {
        let mask = predict(model, &scene.patch).1;
        let mut best = 0;
        for r in 0..=mask.height() - win {
            for c in 0..=mask.width() - win {
                let mut n = 0;
                for y in r..r + win {
                    for x in c..c + win {
                        n += mask.get(y, x) as usize;
                    }
                }
                best = best.max(n);
            }
        }
        best
    }

    #[test]
    fn silent_model_finds_nothing() {
        let mut m = band0_model();
        m.bias = -500.0;
        let out = mine_hard_negatives(&m, &[scene("a", 64, 64, &[(5, 5, 4)])], &HnmConfig::default()).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn single_blob_gives_one_window_containing_it() {
        let s = scene("a", 80, 70, &[(30, 41, 5)]);
        let cfg = HnmConfig { window: 16, stride: 1, min_positive: 0, max_patches: 10 };
        let m = band0_model();
        let out = mine_hard_negatives(&m, std::slice::from_ref(&s), &cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].positives, 25);
        assert_eq!(out[0].positives, brute_max(&s, &m, 16));
        let h = &out[0];
        assert!(h.row <= 30 && h.row + 16 >= 35 && h.col <= 41 && h.col + 16 >= 46);
        assert_eq!(h.mask.count_positive(), 0);
        assert_eq!((h.patch.width(), h.patch.height()), (16, 16));
    }

    #[test]
    fn cap_keeps_the_larger_blob() {
        let a = scene("a", 64, 64, &[(10, 10, 3)]);
        let b = scene("b", 64, 64, &[(40, 20, 6)]);
        let cfg = HnmConfig { window: 16, stride: 4, min_positive: 0, max_patches: 1 };
        let m = band0_model();
        let out = mine_hard_negatives(&m, &[a, b.clone()], &cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].scene_id, "b");
        assert_eq!(out[0].positives, brute_max(&b, &m, 16));
    }

    #[test]
    fn unattested_scene_rejected() {
        let mut s = scene("a", 32, 32, &[]);
        s.solar_free = false;
        assert!(mine_hard_negatives(&band0_model(), &[s], &HnmConfig::default()).is_err());
    }

    #[test]
    fn small_scene_uses_whole_extent() {
        let s = scene("a", 40, 30, &[(3, 3, 2)]);
        let out = mine_hard_negatives(&band0_model(), &[s], &HnmConfig::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!((out[0].patch.width(), out[0].patch.height()), (40, 30));
    }

    #[test]
    fn holdout_takes_every_kth_window() {
        let blobs: Vec<(usize, usize, usize)> = (0..5).map(|i| (4, 4 + 20 * i, 6 - i)).collect();
        let s = scene("a", 110, 20, &blobs);
        let cfg = HnmConfig { window: 16, stride: 2, min_positive: 0, max_patches: 10 };
        let out = mine_hard_negatives(&band0_model(), &[s], &cfg).unwrap();
        assert_eq!(out.len(), 5);
        let (train, val) = hard_negative_pairs(&out, 2);
        assert_eq!((train.len(), val.len()), (3, 2));
        assert_eq!(val[0].id, out[1].id());
        assert_eq!(val[1].id, out[3].id());
        let (train, val) = hard_negative_pairs(&out, 0);
        assert_eq!((train.len(), val.len()), (5, 0));
        assert!(train.iter().all(|p| p.mask.count_positive() == 0));
    }
}
