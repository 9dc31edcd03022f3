use serde::{Deserialize, Serialize};

use super::{Grid, RasterPatch, BAND_GREEN, BAND_NIR, BAND_SWIR1};
use crate::Scalar;

/// Normalized-difference index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    /// (green − SWIR1) / (green + SWIR1)
    Ndsi,
    /// Water index; band pair picked by [`NdwiVariant`].
    Ndwi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NdwiVariant {
    /// Gao: (NIR − SWIR1) / (NIR + SWIR1)
    #[default]
    Gao,
    /// McFeeters: (green − NIR) / (green + NIR)
    Mcfeeters,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexConfig {
    pub ndwi: NdwiVariant,
    /// Emitted where both bands are zero.
    pub fill: f64,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig { ndwi: NdwiVariant::Gao, fill: 0.0 }
    }
}

impl IndexKind {
    /// Band pair `(a, b)` for `(a − b) / (a + b)`.
    pub fn bands(self, cfg: &IndexConfig) -> (usize, usize) {
        match (self, cfg.ndwi) {
            (IndexKind::Ndsi, _) => (BAND_GREEN, BAND_SWIR1),
            (IndexKind::Ndwi, NdwiVariant::Gao) => (BAND_NIR, BAND_SWIR1),
            (IndexKind::Ndwi, NdwiVariant::Mcfeeters) => (BAND_GREEN, BAND_NIR),
        }
    }
}

#[inline]
pub(crate) fn normalized_difference<T: Scalar>(a: T, b: T, fill: T) -> T {
    let s = a + b;
    if s == T::zero() {
        fill
    } else {
        (a - b) / s
    }
}

pub fn compute_index<T: Scalar>(patch: &RasterPatch<T>, kind: IndexKind, cfg: &IndexConfig) -> Grid<T> {
    let (a, b) = kind.bands(cfg);
    let fill = T::lit(cfg.fill.clamp(-1.0, 1.0));
    let (ga, gb) = (patch.band(a).data(), patch.band(b).data());
    let data = ga.iter().zip(gb).map(|(&x, &y)| normalized_difference(x, y, fill)).collect();
    Grid::from_vec(patch.width(), patch.height(), data).expect("patch shape")
}
