use serde::{Deserialize, Serialize};

use crate::raster::{compute_index, Grid, IndexConfig, IndexKind, RasterPatch, BAND_COUNT};
use crate::Scalar;

/// Which inputs describe a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Half-width of the square window; 2 gives 5×5.
    pub radius: usize,
    pub ndsi: bool,
    pub ndwi: bool,
    pub indices: IndexConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { radius: 2, ndsi: false, ndwi: false, indices: IndexConfig::default() }
    }
}

impl FeatureConfig {
    pub fn window_side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn len(&self) -> usize {
        BAND_COUNT * self.window_side().pow(2) + self.ndsi as usize + self.ndwi as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Mirror index into `0..n` without repeating the edge sample.
#[inline]
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Per-pixel feature extractor bound to one patch.
pub struct PixelFeatures<'a, T> {
    patch: &'a RasterPatch<T>,
    config: FeatureConfig,
    ndsi: Option<Grid<T>>,
    ndwi: Option<Grid<T>>,
}

impl<'a, T: Scalar> PixelFeatures<'a, T> {
    pub fn new(patch: &'a RasterPatch<T>, config: FeatureConfig) -> Self {
        let ndsi = config.ndsi.then(|| compute_index(patch, IndexKind::Ndsi, &config.indices));
        let ndwi = config.ndwi.then(|| compute_index(patch, IndexKind::Ndwi, &config.indices));
        PixelFeatures { patch, config, ndsi, ndwi }
    }

    pub fn len(&self) -> usize {
        self.config.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Band-major window values, then index channels at the centre.
    /// Borders are reflect-padded.
    pub fn fill(&self, row: usize, col: usize, out: &mut [T]) {
        let r = self.config.radius as isize;
        let (w, h) = (self.patch.width(), self.patch.height());
        let mut i = 0;
        for band in self.patch.bands() {
            let data = band.data();
            for dy in -r..=r {
                let y = reflect(row as isize + dy, h);
                for dx in -r..=r {
                    out[i] = data[y * w + reflect(col as isize + dx, w)];
                    i += 1;
                }
            }
        }
        for g in [&self.ndsi, &self.ndwi].into_iter().flatten() {
            out[i] = g.get(row, col);
            i += 1;
        }
    }
}

/// Dense `pixels × len` feature matrix in raster order.
pub fn extract_features<T: Scalar>(patch: &RasterPatch<T>, config: &FeatureConfig) -> Vec<Vec<T>> {
    let fx = PixelFeatures::new(patch, *config);
    let mut out = Vec::with_capacity(patch.width() * patch.height());
    for row in 0..patch.height() {
        for col in 0..patch.width() {
            let mut v = vec![T::zero(); fx.len()];
            fx.fill(row, col, &mut v);
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoTransform;

    fn t() -> GeoTransform {
        GeoTransform::north_up(0.0, 0.0, 10.0, 32643)
    }

    #[test]
    fn feature_lengths() {
        let p = RasterPatch::<f64>::uniform(4, 4, [0.1; 12], t()).unwrap();
        for (r, n) in [(0, 12), (1, 108), (2, 300)] {
            let cfg = FeatureConfig { radius: r, ..Default::default() };
            assert_eq!(cfg.len(), n);
            assert!(extract_features(&p, &cfg).iter().all(|v| v.len() == n));
        }
        let cfg = FeatureConfig { radius: 0, ndsi: true, ndwi: true, ..Default::default() };
        assert_eq!(extract_features(&p, &cfg)[0].len(), 14);
    }

    #[test]
    fn uniform_patch_gives_identical_vectors() {
        let p = RasterPatch::<f32>::uniform(6, 5, [0.3; 12], t()).unwrap();
        let f = extract_features(&p, &FeatureConfig { radius: 2, ndsi: true, ..Default::default() });
        assert!(f.iter().all(|v| v == &f[0]));
    }

    #[test]
    fn reflect_padding_mirrors_without_edge_repeat() {
        assert_eq!((-1..6).map(|i| reflect(i, 4)).collect::<Vec<_>>(), vec![1, 0, 1, 2, 3, 2, 1]);
        assert_eq!(reflect(-3, 1), 0);
        let mut p = RasterPatch::<f64>::uniform(3, 1, [0.0; 12], t()).unwrap();
        for col in 0..3 {
            p.set_pixel(0, col, &[col as f64; 12]);
        }
        let f = extract_features(&p, &FeatureConfig { radius: 1, ..Default::default() });
        // Centre row of the first band's window at column 0: [1, 0, 1].
        assert_eq!(&f[0][3..6], &[1.0, 0.0, 1.0]);
    }
}
