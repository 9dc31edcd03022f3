//! Fixture builders and a runner for the `heliomap` binary.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use heliomap::raster::{write_mask, write_raster, GeoTransform, Grid, LabelMask, RasterFormat, RasterPatch, BAND_COUNT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub type Spectrum = [f32; BAND_COUNT];

pub const VEGETATION: Spectrum = [0.04, 0.05, 0.08, 0.05, 0.12, 0.25, 0.30, 0.32, 0.33, 0.34, 0.22, 0.12];
pub const SOLAR: Spectrum = [0.08, 0.10, 0.09, 0.08, 0.09, 0.10, 0.11, 0.12, 0.12, 0.12, 0.16, 0.14];
pub const EPSG: i32 = 32643;
pub const SIZE: usize = 24;

pub struct Ran {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

fn finish(o: Output) -> Ran {
    Ran {
        code: o.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&o.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
    }
}

pub fn heliomap() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_heliomap"));
    c.env_remove("HELIOMAP_LOG");
    c
}

pub fn run(args: &[&str]) -> Ran {
    finish(heliomap().args(args).output().unwrap())
}

pub fn run_with_threads(args: &[&str], threads: usize) -> Ran {
    finish(heliomap().args(args).env("RAYON_NUM_THREADS", threads.to_string()).output().unwrap())
}

/// Panics with the command's stderr unless it exited 0.
pub fn ok(args: &[&str]) -> Ran {
    let r = run(args);
    assert_eq!(r.code, 0, "heliomap {args:?} failed:\n{}", r.stderr);
    r
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn transform(index: usize) -> GeoTransform {
    GeoTransform::north_up(600_000.0 + 5_000.0 * index as f64, 1_440_000.0, 10.0, EPSG)
}

/// A vegetated patch with one solar rectangle placed by `seed`, and its mask.
pub fn scene(index: usize, seed: u64) -> (RasterPatch<f32>, LabelMask) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0f32, 0.005).unwrap();
    let t = transform(index);
    let (h, w) = (rng.random_range(5..9), rng.random_range(5..9));
    let (r0, c0) = (rng.random_range(2..SIZE - h - 2), rng.random_range(2..SIZE - w - 2));
    let truth = Grid::from_fn(SIZE, SIZE, |r, c| ((r0..r0 + h).contains(&r) && (c0..c0 + w).contains(&c)) as u8);
    let mut patch = RasterPatch::uniform(SIZE, SIZE, [0.0f32; BAND_COUNT], t).unwrap();
    for r in 0..SIZE {
        for c in 0..SIZE {
            let base = if truth.get(r, c) == 1 { SOLAR } else { VEGETATION };
            patch.set_pixel(r, c, &base.map(|v| (v + noise.sample(&mut rng)).max(0.001)));
        }
    }
    (patch, LabelMask::new(truth, t).unwrap())
}

/// `n` scenes under `root/patches` and `root/masks`.
pub fn dataset(root: &Path, n: usize) -> (PathBuf, PathBuf) {
    let (pd, md) = (root.join("patches"), root.join("masks"));
    std::fs::create_dir_all(&pd).unwrap();
    std::fs::create_dir_all(&md).unwrap();
    for i in 0..n {
        let (p, m) = scene(i, 100 + i as u64);
        write_raster(&p, &pd.join(format!("s{i:02}.rgrid")), RasterFormat::Rgrid).unwrap();
        write_mask(&m, &md.join(format!("s{i:02}.rgrid"))).unwrap();
    }
    (pd, md)
}

/// Settings small enough for a test to train in seconds.
pub const FAST_CONFIG: &str = r#"
seed = 5

[cluster]
k = 4
samples_per_patch = 200

[dataset]
ratios = [0.6, 0.2, 0.2]

[features]
radius = 1

[train]
epochs = 4
batch_size = 64
pixels_per_patch = 256
lr = 0.05

[hnm]
window = 8
stride = 4
max_patches = 4
epochs = 2
"#;

pub fn write_config(root: &Path, text: &str) -> PathBuf {
    let p = root.join("heliomap.toml");
    std::fs::write(&p, text).unwrap();
    p
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

/// Every file under `dir`, relative path to bytes.
pub fn tree(dir: &Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}
