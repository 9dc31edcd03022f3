//! Synthetic Sentinel-2-like scenes with implanted solar farms.
#![allow(dead_code)]

use heliomap::raster::{GeoTransform, Grid, LabelMask, RasterPatch, BAND_COUNT};
use heliomap::vector::Polygon;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub type Spectrum = [f32; BAND_COUNT];

pub const VEGETATION: Spectrum = [0.04, 0.05, 0.08, 0.05, 0.12, 0.25, 0.30, 0.32, 0.33, 0.34, 0.22, 0.12];
pub const SOIL: Spectrum = [0.10, 0.12, 0.16, 0.20, 0.22, 0.24, 0.26, 0.28, 0.29, 0.29, 0.34, 0.30];
pub const SOLAR: Spectrum = [0.08, 0.10, 0.09, 0.08, 0.09, 0.10, 0.11, 0.12, 0.12, 0.12, 0.16, 0.14];
/// Dark roofs: close to the panel signature, a little brighter.
pub const DISTRACTOR: Spectrum = [0.10, 0.13, 0.12, 0.11, 0.12, 0.13, 0.14, 0.15, 0.15, 0.15, 0.20, 0.18];

/// Green shade netting: panel-like visible bands with a weak vegetation
/// red edge. Never present in solar scenes.
pub const SHADE: Spectrum = [0.07, 0.09, 0.08, 0.07, 0.10, 0.15, 0.18, 0.19, 0.19, 0.19, 0.15, 0.11];

pub const NOISE: f64 = 0.006;
pub const PIXEL: f64 = 10.0;
pub const EPSG: i32 = 32643;

/// Pixel classes of the generator.
pub const BG: u8 = 0;
pub const PANEL: u8 = 1;
pub const ROOF: u8 = 2;
pub const NET: u8 = 3;

pub struct Scene {
    pub id: String,
    pub patch: RasterPatch<f32>,
    /// 0 background, 1 solar, 2 roof, 3 shade net.
    pub truth: Grid<u8>,
    /// Ground-truth farm footprints in the scene CRS.
    pub farms: Vec<Polygon>,
}

impl Scene {
    pub fn solar_mask(&self) -> LabelMask {
        LabelMask::new(self.truth.map(|v| (v == PANEL) as u8), *self.patch.transform()).unwrap()
    }
}

fn transform(index: usize) -> GeoTransform {
    // Scenes tile a strip around 76E 13N, 5 km apart.
    GeoTransform::north_up(600_000.0 + 5_000.0 * index as f64, 1_440_000.0, PIXEL, EPSG)
}

fn fill(truth: &mut Grid<u8>, r0: usize, c0: usize, h: usize, w: usize, v: u8) {
    for r in r0..(r0 + h).min(truth.height()) {
        for c in c0..(c0 + w).min(truth.width()) {
            truth.set(r, c, v);
        }
    }
}

fn free(truth: &Grid<u8>, r0: usize, c0: usize, h: usize, w: usize, margin: usize) -> bool {
    let (rs, cs) = (r0.saturating_sub(margin), c0.saturating_sub(margin));
    let (re, ce) = ((r0 + h + margin).min(truth.height()), (c0 + w + margin).min(truth.width()));
    (rs..re).all(|r| (cs..ce).all(|c| truth.get(r, c) == BG))
}

/// Places `count` non-overlapping rectangles of class `v`; returns their
/// `(row, col, h, w)`.
fn place(truth: &mut Grid<u8>, rng: &mut ChaCha8Rng, count: usize, size: (usize, usize), v: u8) -> Vec<(usize, usize, usize, usize)> {
    let n = truth.width();
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < count && tries < 1000 {
        tries += 1;
        let h = rng.random_range(size.0..=size.1);
        let w = rng.random_range(size.0..=size.1);
        let r0 = rng.random_range(4..n - h - 4);
        let c0 = rng.random_range(4..n - w - 4);
        if free(truth, r0, c0, h, w, 6) {
            fill(truth, r0, c0, h, w, v);
            out.push((r0, c0, h, w));
        }
    }
    out
}

fn render(id: String, index: usize, truth: Grid<u8>, rng: &mut ChaCha8Rng, farms: &[(usize, usize, usize, usize)]) -> Scene {
    let size = truth.width();
    let noise = Normal::new(0.0, NOISE).unwrap();
    // Two background covers split by a wavy boundary.
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let mut bands: Vec<Grid<f32>> = (0..BAND_COUNT).map(|_| Grid::filled(size, size, 0.0)).collect();
    for r in 0..size {
        for c in 0..size {
            let spectrum = match truth.get(r, c) {
                PANEL => &SOLAR,
                ROOF => &DISTRACTOR,
                NET => &SHADE,
                _ => {
                    let edge = size as f64 / 2.0 + 40.0 * (r as f64 / 30.0 + phase).sin();
                    if (c as f64) < edge {
                        &VEGETATION
                    } else {
                        &SOIL
                    }
                }
            };
            for (b, band) in bands.iter_mut().enumerate() {
                band.set(r, c, (spectrum[b] as f64 + noise.sample(rng)).max(0.001) as f32);
            }
        }
    }
    let t = transform(index);
    let polys = farms
        .iter()
        .map(|&(r0, c0, h, w)| {
            let (x0, y0) = t.pixel_to_world(c0 as f64, r0 as f64);
            let (x1, y1) = t.pixel_to_world((c0 + w) as f64, (r0 + h) as f64);
            Polygon::rect(x0, y0, x1, y1)
        })
        .collect();
    Scene { id, patch: RasterPatch::new(bands, t).unwrap(), truth, farms: polys }
}

/// A scene with one to three farms and up to two distractor roofs.
pub fn solar_scene(index: usize, size: usize, seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut truth = Grid::filled(size, size, BG);
    let n_farms = rng.random_range(1..=3);
    let farms = place(&mut truth, &mut rng, n_farms, (12, 36), PANEL);
    let n_roofs = rng.random_range(0..=2);
    place(&mut truth, &mut rng, n_roofs, (4, 10), ROOF);
    render(format!("scene-{index:02}"), index, truth, &mut rng, &farms)
}

/// A solar-free scene dense with roofs and shade nets.
pub fn distractor_scene(index: usize, size: usize, seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD15_7AC7 ^ index as u64);
    let mut truth = Grid::filled(size, size, BG);
    place(&mut truth, &mut rng, 10, (5, 14), ROOF);
    place(&mut truth, &mut rng, 6, (6, 16), NET);
    render(format!("distractor-{index:02}"), index, truth, &mut rng, &[])
}

/// Uniform scene drawn from one spectrum with noise.
pub fn noise_patch(size: usize, spectrum: &Spectrum, seed: u64) -> RasterPatch<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE).unwrap();
    let bands = (0..BAND_COUNT)
        .map(|b| Grid::from_fn(size, size, |_, _| (spectrum[b] as f64 + noise.sample(&mut rng)) as f32))
        .collect();
    RasterPatch::new(bands, transform(0)).unwrap()
}
