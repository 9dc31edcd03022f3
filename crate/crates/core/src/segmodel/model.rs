use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sigmoid, FeatureConfig, PixelFeatures};
use crate::raster::{Grid, LabelMask, RasterPatch};
use crate::{Error, Result, Scalar};

/// What the trainer, inference and mining loops need from a model.
pub trait PixelModel<T: Scalar>: Sync {
    fn feature_config(&self) -> &FeatureConfig;
    /// Probability cutoff; a pixel is positive when `p ≥ threshold`.
    fn threshold(&self) -> f64;
    fn num_params(&self) -> usize;
    fn params(&self) -> Vec<T>;
    fn set_params(&mut self, params: &[T]);
    fn logit(&self, features: &[T]) -> T;
    /// Adds `scale · ∂logit/∂params` into `grad`.
    fn add_logit_grad(&self, features: &[T], scale: T, grad: &mut [T]);
}

/// Per-feature standardisation applied before the linear score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler<T> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> Scaler<T> {
    /// Mean and standard deviation per column. Constant columns get scale 1.
    pub fn fit<'a>(rows: impl Iterator<Item = &'a [T]>, dim: usize) -> Self {
        let mut n = 0usize;
        let mut sum = vec![0.0f64; dim];
        let mut sq = vec![0.0f64; dim];
        let rows: Vec<&[T]> = rows.collect();
        for r in &rows {
            n += 1;
            for (s, v) in sum.iter_mut().zip(r.iter()) {
                *s += v.as_f64();
            }
        }
        let mean: Vec<f64> = sum.iter().map(|s| if n > 0 { s / n as f64 } else { 0.0 }).collect();
        for r in &rows {
            for ((q, v), m) in sq.iter_mut().zip(r.iter()).zip(&mean) {
                *q += (v.as_f64() - m).powi(2);
            }
        }
        let scale = sq
            .iter()
            .map(|q| {
                let sd = if n > 1 { (q / n as f64).sqrt() } else { 0.0 };
                T::lit(if sd > 1e-12 { sd } else { 1.0 })
            })
            .collect();
        Scaler { mean: mean.into_iter().map(T::lit).collect(), scale }
    }
}

/// Linear-logistic pixel classifier over windowed features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub features: FeatureConfig,
    pub threshold: f64,
    pub scaler: Option<Scaler<T>>,
}

impl<T: Scalar> SegModel<T> {
    pub fn zeros(features: FeatureConfig) -> Self {
        SegModel { weights: vec![T::zero(); features.len()], bias: T::zero(), features, threshold: 0.5, scaler: None }
    }

    /// Small seeded uniform weights in ±0.01.
    pub fn init(features: FeatureConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Self::zeros(features);
        m.weights.iter_mut().for_each(|w| *w = T::lit(rng.random_range(-0.01..0.01)));
        m
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        self.threshold = threshold;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.features.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} features",
                self.weights.len(),
                self.features.len()
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Argument(format!("threshold must be in (0, 1), got {}", self.threshold)));
        }
        if self.weights.iter().any(|w| !w.is_finite()) || !self.bias.is_finite() {
            return Err(Error::Argument("model weights must be finite".into()));
        }
        if let Some(s) = &self.scaler {
            if s.mean.len() != self.weights.len() || s.scale.len() != self.weights.len() {
                return Err(Error::Dimension("scaler length does not match weights".into()));
            }
            if s.scale.iter().any(|v| !(v.is_finite() && *v > T::zero())) {
                return Err(Error::Argument("scaler must be finite and positive".into()));
            }
        }
        Ok(())
    }
}

impl<T: Scalar> PixelModel<T> for SegModel<T> {
    fn feature_config(&self) -> &FeatureConfig {
        &self.features
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }

    fn num_params(&self) -> usize {
        self.weights.len() + 1
    }

    fn params(&self) -> Vec<T> {
        let mut p = self.weights.clone();
        p.push(self.bias);
        p
    }

    fn set_params(&mut self, params: &[T]) {
        let n = self.weights.len();
        self.weights.copy_from_slice(&params[..n]);
        self.bias = params[n];
    }

    fn logit(&self, x: &[T]) -> T {
        match &self.scaler {
            None => self.weights.iter().zip(x).fold(self.bias, |acc, (&w, &v)| acc + w * v),
            Some(s) => self
                .weights
                .iter()
                .zip(x)
                .zip(s.mean.iter().zip(&s.scale))
                .fold(self.bias, |acc, ((&w, &v), (&m, &sd))| acc + w * (v - m) / sd),
        }
    }

    fn add_logit_grad(&self, x: &[T], scale: T, grad: &mut [T]) {
        let n = self.weights.len();
        match &self.scaler {
            None => {
                for (g, &v) in grad[..n].iter_mut().zip(x) {
                    *g += scale * v;
                }
            }
            Some(s) => {
                for (((g, &v), &m), &sd) in grad[..n].iter_mut().zip(x).zip(&s.mean).zip(&s.scale) {
                    *g += scale * (v - m) / sd;
                }
            }
        }
        grad[n] += scale;
    }
}

/// Positive-class probability for every pixel.
pub fn predict_proba<T: Scalar, M: PixelModel<T>>(model: &M, patch: &RasterPatch<T>) -> Grid<T> {
    let fx = PixelFeatures::new(patch, *model.feature_config());
    let w = patch.width();
    let rows: Vec<Vec<T>> = (0..patch.height())
        .into_par_iter()
        .map(|row| {
            let mut buf = vec![T::zero(); fx.len()];
            (0..w)
                .map(|col| {
                    fx.fill(row, col, &mut buf);
                    sigmoid(model.logit(&buf))
                })
                .collect()
        })
        .collect();
    Grid::from_vec(w, patch.height(), rows.into_iter().flatten().collect()).expect("patch shape")
}

/// Probabilities and the thresholded mask (`p ≥ threshold`).
pub fn predict<T: Scalar, M: PixelModel<T>>(model: &M, patch: &RasterPatch<T>) -> (Grid<T>, LabelMask) {
    let prob = predict_proba(model, patch);
    let t = T::lit(model.threshold());
    let mask = LabelMask::new(prob.map(|p| (p >= t) as u8), *patch.transform()).expect("binary mask");
    (prob, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoTransform;
    use rand::Rng;

    fn patch(seed: u64) -> RasterPatch<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bands = (0..12).map(|_| Grid::from_fn(9, 7, |_, _| rng.random::<f64>())).collect();
        RasterPatch::new(bands, GeoTransform::north_up(0.0, 0.0, 10.0, 32643)).unwrap()
    }

    #[test]
    fn zero_model_gives_half_and_full_mask() {
        let m = SegModel::<f64>::zeros(FeatureConfig::default());
        let (p, mask) = predict(&m, &patch(1));
        assert!(p.data().iter().all(|&v| v == 0.5));
        assert_eq!(mask.count_positive(), 63);
    }

    #[test]
    fn large_negative_bias_gives_empty_mask() {
        let mut m = SegModel::<f64>::zeros(FeatureConfig::default());
        m.bias = -50.0;
        assert_eq!(predict(&m, &patch(2)).1.count_positive(), 0);
    }

    #[test]
    fn raising_threshold_never_adds_pixels() {
        let m = SegModel::<f64>::init(FeatureConfig { radius: 1, ..Default::default() }, 4);
        let mut m = m;
        m.weights.iter_mut().for_each(|w| *w *= 300.0);
        let p = patch(3);
        let mut prev = usize::MAX;
        for t in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let c = predict(&m.clone().with_threshold(t).unwrap(), &p).1.count_positive();
            assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn predict_is_deterministic() {
        let m = SegModel::<f64>::init(FeatureConfig::default(), 9);
        let p = patch(5);
        assert_eq!(predict(&m, &p), predict(&m, &p));
    }

    #[test]
    fn scaler_gradient_matches_logit() {
        let mut m = SegModel::<f64>::init(FeatureConfig { radius: 0, ..Default::default() }, 1);
        m.scaler = Some(Scaler { mean: vec![0.2; 12], scale: vec![0.5; 12] });
        let x: Vec<f64> = (0..12).map(|i| i as f64 * 0.1).collect();
        let mut g = vec![0.0; 13];
        m.add_logit_grad(&x, 1.0, &mut g);
        let p0 = m.params();
        for i in 0..13 {
            let mut a = p0.clone();
            a[i] += 1e-6;
            let mut ma = m.clone();
            ma.set_params(&a);
            assert!(((ma.logit(&x) - m.logit(&x)) / 1e-6 - g[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn invalid_threshold_rejected() {
        assert!(SegModel::<f64>::zeros(FeatureConfig::default()).with_threshold(1.0).is_err());
    }
}
