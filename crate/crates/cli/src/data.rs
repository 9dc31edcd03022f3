//! Loading and saving the files passed between stages.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use heliomap::raster::{read_mask, read_raster, LabelMask, RasterFormat, RasterPatch};
use heliomap::vector::{read_geojson, FeatureCollection};
use heliomap::Scalar;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{io_err, CliError, CliResult};

/// Raster files of a directory keyed by file stem, in id order.
pub fn raster_files(dir: &Path) -> CliResult<BTreeMap<String, PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if !path.is_file() || RasterFormat::from_path(&path).is_err() {
            continue;
        }
        let id = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        if let Some(prev) = out.insert(id.clone(), path) {
            return Err(CliError::invalid(format!("{} and another file share the id {id:?}", prev.display())));
        }
    }
    if out.is_empty() {
        return Err(CliError::invalid(format!("no .rgrid or .tif rasters in {}", dir.display())));
    }
    Ok(out)
}

/// Path of `id` in `files`, or a validation error naming `what`.
pub fn lookup<'a>(files: &'a BTreeMap<String, PathBuf>, id: &str, what: &str) -> CliResult<&'a Path> {
    files.get(id).map(PathBuf::as_path).ok_or_else(|| CliError::invalid(format!("no {what} for id {id:?}")))
}

pub fn load_patch<T: Scalar>(path: &Path) -> CliResult<RasterPatch<T>> {
    Ok(read_raster(path, RasterFormat::from_path(path)?)?)
}

pub fn load_mask(path: &Path) -> CliResult<LabelMask> {
    Ok(read_mask(path)?)
}

pub fn load_geojson(path: &Path) -> CliResult<FeatureCollection> {
    Ok(read_geojson(path)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::invalid(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// A file name safe on every platform, for ids such as `scene@12,40`.
pub fn file_safe(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raster_files_skips_other_files_and_sorts() {
        let d = tempfile::tempdir().unwrap();
        for f in ["b.rgrid", "a.tif", "notes.txt"] {
            std::fs::write(d.path().join(f), b"").unwrap();
        }
        let files = raster_files(d.path()).unwrap();
        assert_eq!(files.keys().collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(lookup(&files, "c", "patch").unwrap_err().exit_code(), 1);
    }

    #[test]
    fn clashing_stems_are_rejected() {
        let d = tempfile::tempdir().unwrap();
        std::fs::write(d.path().join("a.tif"), b"").unwrap();
        std::fs::write(d.path().join("a.rgrid"), b"").unwrap();
        assert!(raster_files(d.path()).is_err());
        assert_eq!(raster_files(&d.path().join("missing")).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn file_safe_replaces_separators() {
        assert_eq!(file_safe("s1@128,0"), "s1_128_0");
    }
}
