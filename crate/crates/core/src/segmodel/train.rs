use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{weighted_bce_logit, Adam, AdamConfig, PixelFeatures, PixelModel};
use crate::raster::{LabelMask, RasterPatch};
use crate::{Error, Result, Scalar};

/// Smallest val-loss drop that counts as an improvement.
pub const LOSS_IMPROVEMENT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Epochs without val improvement before the lr decays.
    pub patience: usize,
    pub decay: f64,
    /// Defaults to negatives/positives over the train masks.
    pub w_pos: Option<f64>,
    pub w_neg: f64,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Pixels drawn from each pair per split; 0 uses every pixel.
    pub pixels_per_patch: usize,
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            batch_size: 32,
            epochs: 50,
            patience: 5,
            decay: 0.9,
            w_pos: None,
            w_neg: 1.0,
            adam: AdamConfig::default(),
            seed: 0,
            pixels_per_patch: 4096,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Argument(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return bad(format!("decay must be in (0, 1), got {}", self.decay));
        }
        if self.w_pos.is_some_and(|w| !(w > 0.0 && w.is_finite())) || !(self.w_neg > 0.0 && self.w_neg.is_finite()) {
            return bad("loss weights must be positive".into());
        }
        Ok(())
    }
}

/// Per-epoch history. Epoch `e` (1-based) is at index `e − 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Learning rate used during each epoch.
    pub lr: Vec<f64>,
    /// Val loss of the starting weights.
    pub initial_val_loss: f64,
    /// Epoch whose weights were returned; 0 means the starting weights.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub w_pos: f64,
    pub w_neg: f64,
    pub train_samples: usize,
    pub val_samples: usize,
}

/// Reduce-on-plateau learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauSchedule {
    lr: f64,
    patience: usize,
    decay: f64,
    best: f64,
    stale: usize,
}

impl PlateauSchedule {
    pub fn new(lr: f64, patience: usize, decay: f64, baseline: f64) -> Self {
        PlateauSchedule { lr, patience, decay, best: baseline, stale: 0 }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Records an epoch's val loss; returns whether it improved on the best.
    pub fn observe(&mut self, val_loss: f64) -> bool {
        let improved = val_loss < self.best - LOSS_IMPROVEMENT;
        if improved {
            self.best = val_loss;
            self.stale = 0;
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                self.lr *= self.decay;
                self.stale = 0;
            }
        }
        improved
    }
}

/// Learning rates the schedule would use for a sequence of val losses.
pub fn epoch_lrs(baseline: f64, val_losses: &[f64], cfg: &TrainConfig) -> Vec<f64> {
    let mut s = PlateauSchedule::new(cfg.lr, cfg.patience, cfg.decay, baseline);
    val_losses
        .iter()
        .map(|&v| {
            let lr = s.lr();
            s.observe(v);
            lr
        })
        .collect()
}

/// An image patch with its weak label.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair<T> {
    pub id: String,
    pub patch: RasterPatch<T>,
    pub mask: LabelMask,
}

impl<T: Scalar> TrainingPair<T> {
    pub fn new(id: impl Into<String>, patch: RasterPatch<T>, mask: LabelMask) -> Result<Self> {
        let id = id.into();
        if patch.width() != mask.width() || patch.height() != mask.height() {
            return Err(Error::Dimension(format!(
                "pair {id}: patch {}x{} vs mask {}x{}",
                patch.width(),
                patch.height(),
                mask.width(),
                mask.height()
            )));
        }
        Ok(TrainingPair { id, patch, mask })
    }
}

/// `(w_pos, w_neg)` = (negatives / positives, 1). No positives gives 1.
pub fn class_weights<T: Scalar>(pairs: &[TrainingPair<T>]) -> (f64, f64) {
    let (pos, total) = pairs.iter().fold((0usize, 0usize), |(p, t), pr| {
        (p + pr.mask.count_positive(), t + pr.mask.width() * pr.mask.height())
    });
    if pos == 0 {
        (1.0, 1.0)
    } else {
        ((total - pos) as f64 / pos as f64, 1.0)
    }
}

#[derive(Clone, Copy)]
struct Sample {
    pair: u32,
    row: u32,
    col: u32,
    label: bool,
}

fn draw_samples<T: Scalar>(pairs: &[TrainingPair<T>], per_patch: usize, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let mut out = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        let (w, n) = (p.mask.width(), p.mask.width() * p.mask.height());
        let idx: Vec<usize> = if per_patch == 0 || per_patch >= n {
            (0..n).collect()
        } else {
            let mut v = rand::seq::index::sample(rng, n, per_patch).into_vec();
            v.sort_unstable();
            v
        };
        out.extend(idx.into_iter().map(|k| Sample {
            pair: i as u32,
            row: (k / w) as u32,
            col: (k % w) as u32,
            label: p.mask.get(k / w, k % w),
        }));
    }
    out
}

fn mean_loss<T: Scalar, M: PixelModel<T>>(
    model: &M,
    fx: &[PixelFeatures<'_, T>],
    samples: &[Sample],
    w: (T, T),
) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let dim = model.feature_config().len();
    let parts: Vec<f64> = samples
        .par_chunks(1024)
        .map(|chunk| {
            let mut buf = vec![T::zero(); dim];
            chunk
                .iter()
                .map(|s| {
                    fx[s.pair as usize].fill(s.row as usize, s.col as usize, &mut buf);
                    weighted_bce_logit(model.logit(&buf), s.label, w.0, w.1).0.as_f64()
                })
                .sum()
        })
        .collect();
    parts.iter().sum::<f64>() / samples.len() as f64
}

/// Mini-batch Adam on weighted BCE with reduce-on-plateau lr.
///
/// `init` is the starting point; `prepare` is called once with a sample of
/// training features when `standardize` is set, so the model can fit input
/// scaling. The weights of the best val epoch are returned.
pub fn train<T, M>(
    init: &M,
    train_set: &[TrainingPair<T>],
    val_set: &[TrainingPair<T>],
    cfg: &TrainConfig,
    prepare: impl FnOnce(&mut M, &[Vec<T>]),
) -> Result<(M, TrainReport)>
where
    T: Scalar,
    M: PixelModel<T> + Clone,
{
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Argument("training needs non-empty train and val sets".into()));
    }
    let fcfg = *init.feature_config();
    let dim = fcfg.len();
    let (w_pos, w_neg) = match cfg.w_pos {
        Some(w) => (w, cfg.w_neg),
        None => (class_weights(train_set).0, cfg.w_neg),
    };
    let wt = (T::lit(w_pos), T::lit(w_neg));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let train_samples = draw_samples(train_set, cfg.pixels_per_patch, &mut rng);
    let val_samples = draw_samples(val_set, cfg.pixels_per_patch, &mut rng);
    let train_fx: Vec<_> = train_set.iter().map(|p| PixelFeatures::new(&p.patch, fcfg)).collect();
    let val_fx: Vec<_> = val_set.iter().map(|p| PixelFeatures::new(&p.patch, fcfg)).collect();

    let mut model = init.clone();
    if cfg.standardize {
        let step = (train_samples.len() / 20_000).max(1);
        let rows: Vec<Vec<T>> = train_samples
            .iter()
            .step_by(step)
            .map(|s| {
                let mut v = vec![T::zero(); dim];
                train_fx[s.pair as usize].fill(s.row as usize, s.col as usize, &mut v);
                v
            })
            .collect();
        prepare(&mut model, &rows);
    }

    let initial_val_loss = mean_loss(&model, &val_fx, &val_samples, wt);
    let mut schedule = PlateauSchedule::new(cfg.lr, cfg.patience, cfg.decay, initial_val_loss);
    let mut best = (0usize, initial_val_loss, model.params());
    let mut opt = Adam::new(model.num_params(), cfg.adam);
    let mut report = TrainReport {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        lr: Vec::new(),
        initial_val_loss,
        best_epoch: 0,
        best_val_loss: initial_val_loss,
        w_pos,
        w_neg,
        train_samples: train_samples.len(),
        val_samples: val_samples.len(),
    };

    let mut order: Vec<usize> = (0..train_samples.len()).collect();
    let mut buf = vec![T::zero(); dim];
    let mut grad = vec![T::zero(); model.num_params()];
    let mut params = model.params();
    for epoch in 1..=cfg.epochs {
        let lr = schedule.lr();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = T::zero());
            let inv = T::one() / T::from_usize_lossy(chunk.len());
            for &i in chunk {
                let s = train_samples[i];
                train_fx[s.pair as usize].fill(s.row as usize, s.col as usize, &mut buf);
                let (loss, dz) = weighted_bce_logit(model.logit(&buf), s.label, wt.0, wt.1);
                if !loss.is_finite() || !dz.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch });
                }
                epoch_loss += loss.as_f64();
                model.add_logit_grad(&buf, dz * inv, &mut grad);
            }
            opt.step(&mut params, &grad, lr);
            model.set_params(&params);
        }
        let train_loss = epoch_loss / train_samples.len().max(1) as f64;
        let val_loss = mean_loss(&model, &val_fx, &val_samples, wt);
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: order.len().div_ceil(cfg.batch_size) });
        }
        if schedule.observe(val_loss) {
            best = (epoch, val_loss, params.clone());
        }
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6} lr {lr:.6}");
        report.train_loss.push(train_loss);
        report.val_loss.push(val_loss);
        report.lr.push(lr);
    }
    model.set_params(&best.2);
    report.best_epoch = best.0;
    report.best_val_loss = best.1;
    Ok((model, report))
}
