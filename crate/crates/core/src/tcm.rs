//! Temporal cluster matching: when did a farm footprint first diverge
//! spectrally from its surroundings?
//!
//! For every scene, pixels of the footprint and of a surrounding ring are
//! clustered together; the KL divergence between the footprint's and the
//! ring's cluster histograms measures how different the footprint looks.
//! The first scene from which the divergence stays above the series median
//! marks initial development.

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::raster::{Grid, LabelMask, RasterPatch, BAND_COUNT};
use crate::weaklabel::{fit_clusters, KMeansParams};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TcmConfig {
    pub k: usize,
    /// Ring width around the footprint's bounding box.
    pub ring_radius_px: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Scenes after the change allowed to fall back to the median or below.
    pub dip_tolerance: usize,
}

impl Default for TcmConfig {
    fn default() -> Self {
        TcmConfig { k: 16, ring_radius_px: 20, seed: 0, max_iter: 50, dip_tolerance: 1 }
    }
}

/// Co-registered scenes of one footprint, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSeries<T> {
    dates: Vec<NaiveDate>,
    scenes: Vec<RasterPatch<T>>,
}

impl<T: Scalar> SceneSeries<T> {
    pub fn new(scenes: Vec<(NaiveDate, RasterPatch<T>)>) -> Result<Self> {
        if scenes.is_empty() {
            return Err(Error::Argument("scene series is empty".into()));
        }
        for w in scenes.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Argument(format!("scene dates not strictly increasing at {}", w[1].0)));
            }
        }
        let first = &scenes[0].1;
        for (d, s) in &scenes[1..] {
            if s.width() != first.width() || s.height() != first.height() || s.transform() != first.transform() {
                return Err(Error::Argument(format!("scene {d} is not co-registered with the first scene")));
            }
        }
        let (dates, scenes) = scenes.into_iter().unzip();
        Ok(SceneSeries { dates, scenes })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn scenes(&self) -> &[RasterPatch<T>] {
        &self.scenes
    }
}

/// Footprint's bounding box grown by `radius`, minus the footprint,
/// clipped to the grid.
pub fn annulus(footprint: &LabelMask, radius: usize) -> Result<Grid<u8>> {
    let (w, h) = (footprint.width(), footprint.height());
    let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
    for r in 0..h {
        for c in 0..w {
            if footprint.get(r, c) {
                r0 = r0.min(r);
                r1 = r1.max(r);
                c0 = c0.min(c);
                c1 = c1.max(c);
            }
        }
    }
    if r0 == usize::MAX {
        return Err(Error::Argument("footprint is empty".into()));
    }
    let (r0, c0) = (r0.saturating_sub(radius), c0.saturating_sub(radius));
    let (r1, c1) = ((r1 + radius).min(h - 1), (c1 + radius).min(w - 1));
    let ring = Grid::from_fn(w, h, |r, c| ((r0..=r1).contains(&r) && (c0..=c1).contains(&c) && !footprint.get(r, c)) as u8);
    if ring.data().iter().all(|&v| v == 0) {
        return Err(Error::Argument("footprint leaves no surrounding ring".into()));
    }
    Ok(ring)
}

/// `Σ P ln(P/Q)` with add-one smoothing on both histograms.
pub fn smoothed_kl(p_counts: &[usize], q_counts: &[usize]) -> f64 {
    assert_eq!(p_counts.len(), q_counts.len());
    let k = p_counts.len() as f64;
    let np = p_counts.iter().sum::<usize>() as f64 + k;
    let nq = q_counts.iter().sum::<usize>() as f64 + k;
    p_counts
        .iter()
        .zip(q_counts)
        .map(|(&a, &b)| {
            let p = (a as f64 + 1.0) / np;
            let q = (b as f64 + 1.0) / nq;
            p * (p / q).ln()
        })
        .sum()
}

/// Median; mean of the middle pair for even lengths.
fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Per-scene divergences and their median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlSeries<T> {
    pub values: Vec<T>,
    pub median: T,
}

impl<T: Scalar> KlSeries<T> {
    pub fn from_values(values: Vec<T>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("KL series must be non-empty and finite".into()));
        }
        let f: Vec<f64> = values.iter().map(|v| v.as_f64()).collect();
        Ok(KlSeries { median: T::lit(median(&f)), values })
    }
}

fn scene_kl<T: Scalar>(scene: &RasterPatch<T>, footprint: &LabelMask, ring: &Grid<u8>, cfg: &TcmConfig) -> Result<f64> {
    let mut samples: Vec<T> = Vec::new();
    let mut in_fp: Vec<bool> = Vec::new();
    let mut px = [T::zero(); BAND_COUNT];
    for r in 0..scene.height() {
        for c in 0..scene.width() {
            let f = footprint.get(r, c);
            if f || ring.get(r, c) == 1 {
                scene.pixel_into(r, c, &mut px);
                samples.extend_from_slice(&px);
                in_fp.push(f);
            }
        }
    }
    let mut distinct: Vec<&[T]> = samples.chunks_exact(BAND_COUNT).collect();
    distinct.sort_by(|a, b| a.iter().zip(*b).map(|(x, y)| x.partial_cmp(y).unwrap()).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    distinct.dedup();
    let k = cfg.k.min(distinct.len());
    if k < 2 {
        return Ok(0.0);
    }
    let params = KMeansParams { k, seed: cfg.seed, max_iter: cfg.max_iter, tol: 1e-9 };
    let (model, _) = fit_clusters(&samples, BAND_COUNT, &params)?;
    let mut p = vec![0usize; k];
    let mut q = vec![0usize; k];
    for (x, &f) in samples.chunks_exact(BAND_COUNT).zip(&in_fp) {
        let id = model.nearest(x).0;
        if f {
            p[id] += 1;
        } else {
            q[id] += 1;
        }
    }
    Ok(smoothed_kl(&p, &q))
}

/// KL divergence of footprint vs ring cluster histograms for every scene.
pub fn kl_series<T: Scalar>(series: &SceneSeries<T>, footprint: &LabelMask, cfg: &TcmConfig) -> Result<KlSeries<T>> {
    let first = &series.scenes()[0];
    if footprint.width() != first.width() || footprint.height() != first.height() {
        return Err(Error::Dimension("footprint and scenes differ in shape".into()));
    }
    if cfg.k < 2 {
        return Err(Error::Argument("TCM needs k of at least 2".into()));
    }
    let ring = annulus(footprint, cfg.ring_radius_px)?;
    let values = series
        .scenes()
        .iter()
        .map(|s| scene_kl(s, footprint, &ring, cfg).map(T::lit))
        .collect::<Result<Vec<T>>>()?;
    KlSeries::from_values(values)
}

/// Index of the scene of initial development, or `None` if undetermined.
///
/// Candidates are scenes above the median after which at most
/// `dip_tolerance` scenes fall back to the median or below. The earliest
/// candidate whose value is nearer the mean of the scenes from it onward
/// than the mean of the scenes before it wins; this keeps pre-change noise
/// that happens to sit above the median from being flagged. If no
/// candidate passes that check the earliest candidate is returned.
pub fn detect_change<T: Scalar>(kl: &KlSeries<T>, dip_tolerance: usize) -> Result<Option<usize>> {
    let v: Vec<f64> = kl.values.iter().map(|x| x.as_f64()).collect();
    let n = v.len();
    if n < 3 {
        return Err(Error::Argument(format!("change detection needs at least 3 scenes, got {n}")));
    }
    let med = kl.median.as_f64();
    // dips[i] = number of values at or below the median in v[i..].
    let mut dips = vec![0usize; n + 1];
    for i in (0..n).rev() {
        dips[i] = dips[i + 1] + (v[i] <= med) as usize;
    }
    let candidates: Vec<usize> = (0..n).filter(|&i| v[i] > med && dips[i + 1] <= dip_tolerance).collect();
    let mut prefix = vec![0.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + v[i];
    }
    let after_like = |i: usize| {
        if i == 0 {
            return true;
        }
        let before = prefix[i] / i as f64;
        let after = (prefix[n] - prefix[i]) / (n - i) as f64;
        (v[i] - after).abs() <= (v[i] - before).abs()
    };
    Ok(candidates.iter().copied().find(|&i| after_like(i)).or(candidates.first().copied()))
}

/// Detected scene with its date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeResult {
    pub scene_index: usize,
    pub date: NaiveDate,
    pub year: i32,
}

pub fn change_result(index: Option<usize>, dates: &[NaiveDate]) -> Option<ChangeResult> {
    let i = index?;
    let date = *dates.get(i)?;
    Some(ChangeResult { scene_index: i, date, year: date.year() })
}

/// Calendar year of the change scene.
pub fn year_of(index: Option<usize>, dates: &[NaiveDate]) -> Option<i32> {
    change_result(index, dates).map(|c| c.year)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoTransform;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t() -> GeoTransform {
        GeoTransform::north_up(0.0, 0.0, 10.0, 32643)
    }

    fn kl(values: &[f64]) -> KlSeries<f64> {
        KlSeries::from_values(values.to_vec()).unwrap()
    }

    /// Noisy step: `low` before `at`, `low · ratio` from `at` on.
    fn step(n: usize, at: usize, ratio: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let base = if i < at { 0.1 } else { 0.1 * ratio };
                base * (1.0 + rng.random_range(-0.1..0.1))
            })
            .collect()
    }

    #[test]
    fn step_series_detects_scene_41() {
        for seed in 0..50 {
            assert_eq!(detect_change(&kl(&step(50, 41, 20.0, seed)), 1).unwrap(), Some(41), "seed {seed}");
        }
    }

    #[test]
    fn increasing_series_gives_upper_half() {
        for n in 3usize..40 {
            let lin: Vec<f64> = (0..n).map(|i| i as f64).collect();
            assert_eq!(detect_change(&kl(&lin), 1).unwrap(), Some(n.div_ceil(2)), "linear n={n}");
            let concave: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0).sqrt()).collect();
            assert_eq!(detect_change(&kl(&concave), 1).unwrap(), Some(n.div_ceil(2)), "concave n={n}");
        }
    }

    #[test]
    fn constant_series_is_undetermined() {
        assert_eq!(detect_change(&kl(&[0.4; 10]), 1).unwrap(), None);
        assert!(detect_change(&kl(&[0.1, 0.2]), 1).is_err());
    }

    #[test]
    fn dip_tolerance_allows_one_relapse() {
        let mut v = vec![0.1; 20];
        v[12..].iter_mut().for_each(|x| *x = 2.0);
        v[15] = 0.1;
        assert_eq!(detect_change(&kl(&v), 1).unwrap(), Some(12));
        assert_eq!(detect_change(&kl(&v), 0).unwrap(), Some(16));
    }

    #[test]
    fn prepending_a_low_scene_shifts_by_one() {
        for seed in 0..20 {
            let v = step(50, 41, 5.0, seed);
            let mut w = vec![0.1];
            w.extend_from_slice(&v);
            let a = detect_change(&kl(&v), 1).unwrap().unwrap();
            assert_eq!(detect_change(&kl(&w), 1).unwrap(), Some(a + 1));
        }
    }

    #[test]
    fn year_lookup() {
        let dates: Vec<NaiveDate> = ["2016-01-02", "2017-05-06", "2018-03-14"].iter().map(|s| s.parse().unwrap()).collect();
        assert_eq!(year_of(Some(2), &dates), Some(2018));
        assert_eq!(year_of(Some(0), &dates), Some(2016));
        assert_eq!(year_of(None, &dates), None);
    }

    #[test]
    fn hand_computed_histogram_kl() {
        // Footprint: 12 pixels all in cluster 0; ring: 3 in each of 4.
        let p = [12, 0, 0, 0];
        let q = [3, 3, 3, 3];
        let (np, nq) = (16.0f64, 16.0f64);
        let expected = (13.0 / np) * ((13.0 / np) / (4.0 / nq)).ln() + 3.0 * (1.0 / np) * ((1.0 / np) / (4.0 / nq)).ln();
        assert!((smoothed_kl(&p, &q) - expected).abs() < 1e-12);
        assert!(smoothed_kl(&q, &q).abs() < 1e-15);
    }

    fn spectrum(v: f32) -> [f32; 12] {
        [v; 12]
    }

    #[test]
    fn scene_with_one_footprint_cluster_vs_four_ring_clusters() {
        let (w, h) = (12, 12);
        let mut fp = LabelMask::zeros(w, h, t());
        for r in 4..8 {
            for c in 4..8 {
                fp.set(r, c, true);
            }
        }
        let cfg = TcmConfig { ring_radius_px: 2, ..Default::default() };
        let ring = annulus(&fp, 2).unwrap();
        let mut patch = RasterPatch::uniform(w, h, spectrum(0.1), t()).unwrap();
        // Ring pixels cycle through four spectra; footprint keeps the first.
        let mut k = 0;
        let mut q = [0usize; 4];
        for r in 0..h {
            for c in 0..w {
                if ring.get(r, c) == 1 {
                    patch.set_pixel(r, c, &spectrum(0.1 + 0.2 * (k % 4) as f32));
                    q[k % 4] += 1;
                    k += 1;
                }
            }
        }
        let series = SceneSeries::new(vec![("2019-01-01".parse().unwrap(), patch)]).unwrap();
        let got = kl_series(&series, &fp, &cfg).unwrap().values[0];
        assert!((got as f64 - smoothed_kl(&[16, 0, 0, 0], &q)).abs() < 1e-6);
    }

    #[test]
    fn identical_distributions_have_small_kl() {
        let (w, h) = (40, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let bands = (0..12).map(|_| Grid::from_fn(w, h, |_, _| rng.random::<f32>())).collect();
        let patch = RasterPatch::new(bands, t()).unwrap();
        let mut fp = LabelMask::zeros(w, h, t());
        for r in 8..32 {
            for c in 8..32 {
                fp.set(r, c, true);
            }
        }
        let series = SceneSeries::new(vec![("2019-01-01".parse().unwrap(), patch)]).unwrap();
        let v = kl_series(&series, &fp, &TcmConfig { ring_radius_px: 8, ..Default::default() }).unwrap();
        assert!(v.values[0] < 0.05, "{}", v.values[0]);
        assert!(v.values[0] >= -1e-12);
    }

    #[test]
    fn series_validation() {
        let p = RasterPatch::uniform(4, 4, spectrum(0.1), t()).unwrap();
        let d = |s: &str| s.parse::<NaiveDate>().unwrap();
        assert!(SceneSeries::new(vec![(d("2019-01-02"), p.clone()), (d("2019-01-01"), p.clone())]).is_err());
        let other = RasterPatch::uniform(5, 4, spectrum(0.1), t()).unwrap();
        assert!(SceneSeries::new(vec![(d("2019-01-01"), p.clone()), (d("2019-01-02"), other)]).is_err());
        assert!(annulus(&LabelMask::zeros(4, 4, t()), 2).is_err());
    }

    #[test]
    fn degenerate_scene_is_zero() {
        let p = RasterPatch::uniform(10, 10, spectrum(0.3), t()).unwrap();
        let mut fp = LabelMask::zeros(10, 10, t());
        fp.set(5, 5, true);
        let s = SceneSeries::new(vec![("2020-01-01".parse().unwrap(), p)]).unwrap();
        assert_eq!(kl_series(&s, &fp, &TcmConfig::default()).unwrap().values, vec![0.0]);
    }

    proptest! {
        #[test]
        fn positive_scaling_preserves_detection(seed in 0u64..1000, scale in 1e-3f64..1e3, ratio in 2.0f64..30.0) {
            let v = step(50, 41, ratio, seed);
            let s: Vec<f64> = v.iter().map(|x| x * scale).collect();
            prop_assert_eq!(detect_change(&kl(&v), 1).unwrap(), detect_change(&kl(&s), 1).unwrap());
        }

        #[test]
        fn step_detection_tolerance(seed in 0u64..1000, ratio in 2.0f64..5.0, at in 25usize..50) {
            let got = detect_change(&kl(&step(50, at, ratio, seed)), 1).unwrap().unwrap();
            prop_assert!(got.abs_diff(at) <= 1, "{got} vs {at}");
        }
    }
}
