use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::raster::{GeoTransform, Grid, RasterPatch, BAND_COUNT};
use crate::{Error, Result, Scalar};

/// Spectral centroids learned by k-means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel<T> {
    pub k: usize,
    pub dim: usize,
    /// Row-major `k × dim`.
    pub centroids: Vec<T>,
    pub seed: u64,
    /// Within-cluster sum of squares on the training samples.
    pub inertia: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams { k: 64, seed: 0, max_iter: 100, tol: 1e-6 }
    }
}

/// Inertia after every assignment step, plus the final one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace {
    pub inertia: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[inline]
fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

impl<T: Scalar> ClusterModel<T> {
    pub fn centroid(&self, id: usize) -> &[T] {
        &self.centroids[id * self.dim..(id + 1) * self.dim]
    }

    /// Nearest centroid and squared distance; ties go to the lowest id.
    pub fn nearest(&self, x: &[T]) -> (usize, T) {
        let mut best = (0, sq_dist(x, self.centroid(0)));
        for id in 1..self.k {
            let d = sq_dist(x, self.centroid(id));
            if d < best.1 {
                best = (id, d);
            }
        }
        best
    }

    /// Sum of squared distances of `samples` to their nearest centroid.
    pub fn inertia_of(&self, samples: &[T]) -> f64 {
        samples.chunks_exact(self.dim).map(|x| self.nearest(x).1.as_f64()).sum()
    }
}

const CHUNK: usize = 2048;

/// Assignment step. Chunked so the f64 inertia sum is order-stable.
fn assign<T: Scalar>(model: &ClusterModel<T>, samples: &[T]) -> (Vec<usize>, Vec<T>, f64) {
    let parts: Vec<(Vec<usize>, Vec<T>, f64)> = samples
        .par_chunks(CHUNK * model.dim)
        .map(|chunk| {
            let mut labels = Vec::with_capacity(chunk.len() / model.dim);
            let mut dists = Vec::with_capacity(chunk.len() / model.dim);
            let mut sum = 0.0;
            for x in chunk.chunks_exact(model.dim) {
                let (id, d) = model.nearest(x);
                labels.push(id);
                dists.push(d);
                sum += d.as_f64();
            }
            (labels, dists, sum)
        })
        .collect();
    let mut labels = Vec::with_capacity(samples.len() / model.dim);
    let mut dists = Vec::with_capacity(samples.len() / model.dim);
    let mut total = 0.0;
    for (l, d, s) in parts {
        labels.extend(l);
        dists.extend(d);
        total += s;
    }
    (labels, dists, total)
}

fn kmeans_plus_plus<T: Scalar>(samples: &[T], dim: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    let n = samples.len() / dim;
    let row = |i: usize| &samples[i * dim..(i + 1) * dim];
    let mut centroids = Vec::with_capacity(k * dim);
    centroids.extend_from_slice(row(rng.random_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(row(i), &centroids[..dim]).as_f64()).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // Guard against rounding leaving us on a zero-weight sample.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.extend_from_slice(row(pick));
        let new = &centroids[c * dim..(c + 1) * dim];
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(row(i), new).as_f64());
        }
    }
    centroids
}

/// Lloyd's algorithm from k-means++ seeding.
///
/// `samples` is a flat row-major `n × dim` buffer. Empty clusters are
/// re-seeded from the sample farthest from its centroid.
pub fn fit_clusters<T: Scalar>(samples: &[T], dim: usize, params: &KMeansParams) -> Result<(ClusterModel<T>, FitTrace)> {
    let k = params.k;
    if k < 2 {
        return Err(Error::Argument(format!("k must be at least 2, got {k}")));
    }
    if dim == 0 || samples.len() % dim != 0 {
        return Err(Error::Argument(format!("sample buffer of {} is not a multiple of dim {dim}", samples.len())));
    }
    let n = samples.len() / dim;
    if n < k {
        return Err(Error::Argument(format!("{n} samples is fewer than k = {k}")));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("samples must be finite".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut model = ClusterModel {
        k,
        dim,
        centroids: kmeans_plus_plus(samples, dim, k, &mut rng),
        seed: params.seed,
        inertia: T::zero(),
    };
    let mut trace = FitTrace::default();

    for _ in 0..params.max_iter {
        let (labels, dists, inertia) = assign(&model, samples);
        trace.inertia.push(inertia);
        trace.iterations += 1;

        let mut sums = vec![0.0f64; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (s, &v) in sums[l * dim..(l + 1) * dim].iter_mut().zip(&samples[i * dim..(i + 1) * dim]) {
                *s += v.as_f64();
            }
        }
        let mut next = model.centroids.clone();
        let mut reseeded: Vec<usize> = Vec::new();
        for c in 0..k {
            let dst = &mut next[c * dim..(c + 1) * dim];
            if counts[c] > 0 {
                for (d, s) in dst.iter_mut().zip(&sums[c * dim..(c + 1) * dim]) {
                    *d = T::lit(s / counts[c] as f64);
                }
            } else {
                let far = (0..n)
                    .filter(|i| !reseeded.contains(i))
                    .max_by(|&a, &b| dists[a].partial_cmp(&dists[b]).unwrap().then(b.cmp(&a)))
                    .expect("n >= k");
                reseeded.push(far);
                dst.copy_from_slice(&samples[far * dim..(far + 1) * dim]);
            }
        }
        let shift = (0..k)
            .map(|c| sq_dist(&model.centroids[c * dim..(c + 1) * dim], &next[c * dim..(c + 1) * dim]).as_f64().sqrt())
            .fold(0.0, f64::max);
        model.centroids = next;
        if shift < params.tol && reseeded.is_empty() {
            trace.converged = true;
            break;
        }
    }

    let (_, _, inertia) = assign(&model, samples);
    trace.inertia.push(inertia);
    model.inertia = T::lit(inertia);
    log::debug!("k-means: {} iterations, inertia {inertia:.6}", trace.iterations);
    Ok((model, trace))
}

/// Per-pixel cluster ids.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMap {
    pub ids: Grid<u16>,
    pub transform: GeoTransform,
    pub k: usize,
}

impl ClusterMap {
    pub fn get(&self, row: usize, col: usize) -> usize {
        self.ids.get(row, col) as usize
    }
}

pub fn assign_clusters<T: Scalar>(patch: &RasterPatch<T>, model: &ClusterModel<T>) -> Result<ClusterMap> {
    if model.dim != BAND_COUNT {
        return Err(Error::Dimension(format!("model has {} dims, patch has {BAND_COUNT} bands", model.dim)));
    }
    if model.k > u16::MAX as usize + 1 {
        return Err(Error::Argument("cluster count exceeds u16 ids".into()));
    }
    let (w, h) = (patch.width(), patch.height());
    let rows: Vec<Vec<u16>> = (0..h)
        .into_par_iter()
        .map(|row| {
            let mut px = [T::zero(); BAND_COUNT];
            (0..w)
                .map(|col| {
                    patch.pixel_into(row, col, &mut px);
                    model.nearest(&px).0 as u16
                })
                .collect()
        })
        .collect();
    let ids = Grid::from_vec(w, h, rows.into_iter().flatten().collect())?;
    Ok(ClusterMap { ids, transform: *patch.transform(), k: model.k })
}

/// Draws up to `per_patch` pixel spectra from each patch, seeded.
pub fn sample_pixels<T: Scalar>(patches: &[&RasterPatch<T>], per_patch: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut px = [T::zero(); BAND_COUNT];
    for p in patches {
        let n = p.width() * p.height();
        let idx: Vec<usize> = if per_patch >= n {
            (0..n).collect()
        } else {
            rand::seq::index::sample(&mut rng, n, per_patch).into_iter().collect()
        };
        for i in idx {
            p.pixel_into(i / p.width(), i % p.width(), &mut px);
            out.extend_from_slice(&px);
        }
    }
    out
}
