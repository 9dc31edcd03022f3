//! Georeferenced raster primitives shared by every pipeline stage.

mod geotiff;
mod histmatch;
mod index;
pub mod render;
mod rgrid;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

pub use geotiff::{
    decode_geotiff, encode_geotiff, read_geotiff, write_geotiff, TiffCompression, TiffLayout, TiffSampleType, TiffWriteOptions,
};
pub use histmatch::histogram_match;
pub use index::{compute_index, IndexConfig, IndexKind, NdwiVariant};
pub use rgrid::{decode_rgrid, encode_rgrid, read_rgrid, write_rgrid, RGRID_MAGIC};

/// Sentinel-2 bands carried by a patch, B10 (cirrus) excluded.
pub const S2_BANDS: [&str; 12] = [
    "B01", "B02", "B03", "B04", "B05", "B06", "B07", "B08", "B8A", "B09", "B11", "B12",
];
pub const BAND_COUNT: usize = 12;

pub const BAND_BLUE: usize = 1;
pub const BAND_GREEN: usize = 2;
pub const BAND_RED: usize = 3;
pub const BAND_NIR: usize = 7;
pub const BAND_SWIR1: usize = 10;

/// North-up affine mapping between pixel and projected world coordinates.
///
/// Pixel `(col, row)` refers to the upper-left corner of that pixel; pixel
/// centres sit at `+0.5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub pixel_size_x: f64,
    pub pixel_size_y: f64,
    pub crs_code: i32,
}

impl GeoTransform {
    pub fn new(origin_x: f64, origin_y: f64, pixel_size_x: f64, pixel_size_y: f64, crs_code: i32) -> Result<Self> {
        let t = GeoTransform { origin_x, origin_y, pixel_size_x, pixel_size_y, crs_code };
        t.validate()?;
        Ok(t)
    }

    /// Standard north-up Sentinel-2 10 m grid.
    pub fn north_up(origin_x: f64, origin_y: f64, pixel_size: f64, crs_code: i32) -> Self {
        GeoTransform { origin_x, origin_y, pixel_size_x: pixel_size, pixel_size_y: -pixel_size, crs_code }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.origin_x, self.origin_y, self.pixel_size_x, self.pixel_size_y]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.pixel_size_x <= 0.0 || self.pixel_size_y == 0.0 {
            return Err(Error::Format(format!("invalid geotransform {self:?}")));
        }
        Ok(())
    }

    pub fn pixel_to_world(&self, col: f64, row: f64) -> (f64, f64) {
        (self.origin_x + col * self.pixel_size_x, self.origin_y + row * self.pixel_size_y)
    }

    pub fn world_to_pixel(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.origin_x) / self.pixel_size_x, (y - self.origin_y) / self.pixel_size_y)
    }

    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        self.pixel_to_world(col as f64 + 0.5, row as f64 + 0.5)
    }

    /// Area of one pixel in squared CRS units.
    pub fn pixel_area(&self) -> f64 {
        (self.pixel_size_x * self.pixel_size_y).abs()
    }

    /// `[min_x, min_y, max_x, max_y]` of a `width`×`height` grid.
    pub fn bounds(&self, width: usize, height: usize) -> [f64; 4] {
        let (x0, y0) = self.pixel_to_world(0.0, 0.0);
        let (x1, y1) = self.pixel_to_world(width as f64, height as f64);
        [x0.min(x1), y0.min(y1), x0.max(x1), y0.max(y1)]
    }

    /// Transform of the sub-window whose upper-left pixel is `(col, row)`.
    pub fn window(&self, col: usize, row: usize) -> Self {
        let (x, y) = self.pixel_to_world(col as f64, row as f64);
        GeoTransform { origin_x: x, origin_y: y, ..*self }
    }

    /// GDAL ordering: `[ox, px, 0, oy, 0, py]`.
    pub fn to_gdal(&self) -> [f64; 6] {
        [self.origin_x, self.pixel_size_x, 0.0, self.origin_y, 0.0, self.pixel_size_y]
    }

    pub fn from_gdal(gt: [f64; 6], crs_code: i32) -> Result<Self> {
        if gt[2] != 0.0 || gt[4] != 0.0 {
            return Err(Error::Unsupported("rotated geotransforms".into()));
        }
        GeoTransform::new(gt[0], gt[3], gt[1], gt[5], crs_code)
    }
}

/// Row-major 2-D grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Grid { width, height, data: vec![value; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!("empty grid {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "grid {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Grid { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Grid { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        self.data[row * self.width + col] = value;
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row < self.height && col < self.width
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(T) -> U) -> Grid<U> {
        Grid { width: self.width, height: self.height, data: self.data.iter().copied().map(f).collect() }
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Copies a `w`×`h` window; the window must lie inside the grid.
    pub fn crop(&self, col: usize, row: usize, w: usize, h: usize) -> Grid<T> {
        assert!(col + w <= self.width && row + h <= self.height, "crop window outside grid");
        let mut data = Vec::with_capacity(w * h);
        for r in row..row + h {
            let start = r * self.width + col;
            data.extend_from_slice(&self.data[start..start + w]);
        }
        Grid { width: w, height: h, data }
    }
}

/// Multi-band raster with an arbitrary band count, as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct BandStack {
    pub width: usize,
    pub height: usize,
    pub bands: Vec<Vec<f32>>,
    pub transform: GeoTransform,
}

impl BandStack {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Dimension("raster has zero width or height".into()));
        }
        if self.bands.is_empty() {
            return Err(Error::Dimension("raster has no bands".into()));
        }
        let n = self.width * self.height;
        if let Some(b) = self.bands.iter().position(|b| b.len() != n) {
            return Err(Error::Dimension(format!("band {b} does not match {}x{}", self.width, self.height)));
        }
        self.transform.validate()
    }

    pub fn single<T: Scalar>(grid: &Grid<T>, transform: GeoTransform) -> Self {
        BandStack {
            width: grid.width(),
            height: grid.height(),
            bands: vec![grid.data().iter().map(|v| v.as_f64() as f32).collect()],
            transform,
        }
    }

    /// First band as a scalar grid.
    pub fn band_grid<T: Scalar>(&self, band: usize) -> Result<Grid<T>> {
        let b = self
            .bands
            .get(band)
            .ok_or_else(|| Error::Dimension(format!("band {band} missing")))?;
        Grid::from_vec(self.width, self.height, b.iter().map(|&v| T::lit(v as f64)).collect())
    }
}

/// On-disk raster encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RasterFormat {
    Geotiff,
    Rgrid,
}

impl RasterFormat {
    /// Picks the format from a file extension (`.tif`/`.tiff` or `.rgrid`).
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("tif") | Some("tiff") => Ok(RasterFormat::Geotiff),
            Some("rgrid") => Ok(RasterFormat::Rgrid),
            _ => Err(Error::Format(format!("cannot infer raster format of {}", path.display()))),
        }
    }
}

/// Georeferenced 12-band reflectance patch.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterPatch<T> {
    bands: Vec<Grid<T>>,
    transform: GeoTransform,
    band_ids: Vec<String>,
    /// Processing level tag such as `L1C` or `L2A`, when known.
    pub processing_level: Option<String>,
}

impl<T: Scalar> RasterPatch<T> {
    pub fn new(bands: Vec<Grid<T>>, transform: GeoTransform) -> Result<Self> {
        if bands.len() != BAND_COUNT {
            return Err(Error::Dimension(format!("expected {BAND_COUNT} bands, got {}", bands.len())));
        }
        let (w, h) = (bands[0].width(), bands[0].height());
        if w == 0 || h == 0 {
            return Err(Error::Dimension("patch has zero width or height".into()));
        }
        if bands.iter().any(|b| b.width() != w || b.height() != h) {
            return Err(Error::Dimension("bands differ in size".into()));
        }
        if bands.iter().flat_map(|b| b.data()).any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::Format("reflectance must be finite and non-negative".into()));
        }
        transform.validate()?;
        Ok(RasterPatch {
            bands,
            transform,
            band_ids: S2_BANDS.iter().map(|s| s.to_string()).collect(),
            processing_level: None,
        })
    }

    /// Patch with the same spectrum at every pixel.
    pub fn uniform(width: usize, height: usize, spectrum: [T; BAND_COUNT], transform: GeoTransform) -> Result<Self> {
        let bands = spectrum.iter().map(|&v| Grid::filled(width, height, v)).collect();
        RasterPatch::new(bands, transform)
    }

    pub fn from_stack(stack: BandStack) -> Result<Self> {
        stack.validate()?;
        if stack.bands.len() != BAND_COUNT {
            return Err(Error::Dimension(format!("expected {BAND_COUNT} bands, got {}", stack.bands.len())));
        }
        let bands = (0..BAND_COUNT)
            .map(|b| stack.band_grid(b))
            .collect::<Result<Vec<_>>>()?;
        RasterPatch::new(bands, stack.transform)
    }

    pub fn to_stack(&self) -> BandStack {
        BandStack {
            width: self.width(),
            height: self.height(),
            bands: self.bands.iter().map(|b| b.data().iter().map(|v| v.as_f64() as f32).collect()).collect(),
            transform: self.transform,
        }
    }

    pub fn width(&self) -> usize {
        self.bands[0].width()
    }

    pub fn height(&self) -> usize {
        self.bands[0].height()
    }

    pub fn transform(&self) -> &GeoTransform {
        &self.transform
    }

    pub fn band_ids(&self) -> &[String] {
        &self.band_ids
    }

    pub fn band(&self, index: usize) -> &Grid<T> {
        &self.bands[index]
    }

    pub fn bands(&self) -> &[Grid<T>] {
        &self.bands
    }

    /// Spectrum of one pixel written into `out` (length 12).
    #[inline]
    pub fn pixel_into(&self, row: usize, col: usize, out: &mut [T]) {
        for (o, b) in out.iter_mut().zip(&self.bands) {
            *o = b.get(row, col);
        }
    }

    pub fn pixel(&self, row: usize, col: usize) -> [T; BAND_COUNT] {
        let mut out = [T::zero(); BAND_COUNT];
        self.pixel_into(row, col, &mut out);
        out
    }

    pub fn set_pixel(&mut self, row: usize, col: usize, spectrum: &[T; BAND_COUNT]) {
        for (b, &v) in self.bands.iter_mut().zip(spectrum) {
            b.set(row, col, v);
        }
    }

    pub fn crop(&self, col: usize, row: usize, w: usize, h: usize) -> RasterPatch<T> {
        RasterPatch {
            bands: self.bands.iter().map(|b| b.crop(col, row, w, h)).collect(),
            transform: self.transform.window(col, row),
            band_ids: self.band_ids.clone(),
            processing_level: self.processing_level.clone(),
        }
    }
}

/// Binary per-pixel label grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMask {
    grid: Grid<u8>,
    transform: GeoTransform,
}

impl LabelMask {
    pub fn new(grid: Grid<u8>, transform: GeoTransform) -> Result<Self> {
        if grid.data().iter().any(|&v| v > 1) {
            return Err(Error::Format("label mask values must be 0 or 1".into()));
        }
        transform.validate()?;
        Ok(LabelMask { grid, transform })
    }

    pub fn zeros(width: usize, height: usize, transform: GeoTransform) -> Self {
        LabelMask { grid: Grid::filled(width, height, 0), transform }
    }

    pub fn grid(&self) -> &Grid<u8> {
        &self.grid
    }

    pub fn transform(&self) -> &GeoTransform {
        &self.transform
    }

    pub fn width(&self) -> usize {
        self.grid.width()
    }

    pub fn height(&self) -> usize {
        self.grid.height()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.grid.get(row, col) == 1
    }

    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.grid.set(row, col, on as u8);
    }

    pub fn count_positive(&self) -> usize {
        self.grid.data().iter().filter(|&&v| v == 1).count()
    }

    pub fn crop(&self, col: usize, row: usize, w: usize, h: usize) -> LabelMask {
        LabelMask { grid: self.grid.crop(col, row, w, h), transform: self.transform.window(col, row) }
    }

    pub fn to_stack(&self) -> BandStack {
        BandStack::single(&self.grid.map(|v| v as f32), self.transform)
    }

    /// Reads band 0 of a stack, rejecting anything other than 0/1.
    pub fn from_stack(stack: &BandStack) -> Result<Self> {
        stack.validate()?;
        let grid: Grid<f32> = stack.band_grid(0)?;
        if grid.data().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Format("label mask values must be 0 or 1".into()));
        }
        LabelMask::new(grid.map(|v| v as u8), stack.transform)
    }
}

/// Grid of small class codes with a legend, e.g. a land-cover map.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalRaster {
    grid: Grid<u16>,
    legend: BTreeMap<u16, String>,
    transform: GeoTransform,
}

impl CategoricalRaster {
    pub fn new(grid: Grid<u16>, legend: BTreeMap<u16, String>, transform: GeoTransform) -> Result<Self> {
        if legend.is_empty() {
            return Err(Error::Argument("categorical raster legend is empty".into()));
        }
        if let Some(v) = grid.data().iter().find(|v| !legend.contains_key(v)) {
            return Err(Error::Format(format!("class code {v} missing from legend")));
        }
        transform.validate()?;
        Ok(CategoricalRaster { grid, legend, transform })
    }

    pub fn grid(&self) -> &Grid<u16> {
        &self.grid
    }

    pub fn legend(&self) -> &BTreeMap<u16, String> {
        &self.legend
    }

    pub fn transform(&self) -> &GeoTransform {
        &self.transform
    }
}

/// Reads a 12-band patch in the given format.
pub fn read_raster<T: Scalar>(path: &Path, format: RasterFormat) -> Result<RasterPatch<T>> {
    RasterPatch::from_stack(read_stack(path, format)?)
}

pub fn write_raster<T: Scalar>(patch: &RasterPatch<T>, path: &Path, format: RasterFormat) -> Result<()> {
    write_stack(&patch.to_stack(), path, format)
}

/// Reads any band count.
pub fn read_stack(path: &Path, format: RasterFormat) -> Result<BandStack> {
    match format {
        RasterFormat::Rgrid => read_rgrid(path),
        RasterFormat::Geotiff => read_geotiff(path),
    }
}

pub fn write_stack(stack: &BandStack, path: &Path, format: RasterFormat) -> Result<()> {
    match format {
        RasterFormat::Rgrid => write_rgrid(stack, path),
        RasterFormat::Geotiff => write_geotiff(stack, path, &TiffWriteOptions::default()),
    }
}

pub fn read_mask(path: &Path) -> Result<LabelMask> {
    LabelMask::from_stack(&read_stack(path, RasterFormat::from_path(path)?)?)
}

pub fn write_mask(mask: &LabelMask, path: &Path) -> Result<()> {
    let format = RasterFormat::from_path(path)?;
    match format {
        RasterFormat::Geotiff => write_geotiff(
            &mask.to_stack(),
            path,
            &TiffWriteOptions { sample_type: TiffSampleType::U8, compression: TiffCompression::Deflate, ..Default::default() },
        ),
        RasterFormat::Rgrid => write_rgrid(&mask.to_stack(), path),
    }
}

/// Writes a single-band scalar grid (e.g. probabilities).
pub fn write_band<T: Scalar>(grid: &Grid<T>, transform: GeoTransform, path: &Path) -> Result<()> {
    write_stack(&BandStack::single(grid, transform), path, RasterFormat::from_path(path)?)
}

/// Reads a single-band probability raster, rejecting values outside [0, 1].
pub fn read_probability(path: &Path) -> Result<(Grid<f32>, GeoTransform)> {
    let stack = read_stack(path, RasterFormat::from_path(path)?)?;
    stack.validate()?;
    let grid: Grid<f32> = stack.band_grid(0)?;
    if grid.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Format("probability raster values must lie in [0, 1]".into()));
    }
    Ok((grid, stack.transform))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_world_round_trip_is_exact() {
        let t = GeoTransform::north_up(500_000.0, 1_500_000.0, 10.0, 32643);
        for row in 0..300 {
            for col in [0usize, 1, 17, 255, 1023] {
                let (x, y) = t.pixel_to_world(col as f64, row as f64);
                let (c, r) = t.world_to_pixel(x, y);
                assert!((c - col as f64).abs() < 1e-9 && (r - row as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn transform_rejects_bad_pixel_sizes() {
        assert!(GeoTransform::new(0.0, 0.0, 0.0, -10.0, 4326).is_err());
        assert!(GeoTransform::new(0.0, 0.0, 10.0, 0.0, 4326).is_err());
        assert!(GeoTransform::new(0.0, 0.0, -1.0, -10.0, 4326).is_err());
    }

    #[test]
    fn patch_requires_twelve_bands() {
        let t = GeoTransform::north_up(0.0, 0.0, 10.0, 32643);
        let bands = vec![Grid::filled(2, 2, 0.1f32); 11];
        assert!(matches!(RasterPatch::new(bands, t), Err(Error::Dimension(_))));
    }

    #[test]
    fn patch_rejects_negative_reflectance() {
        let t = GeoTransform::north_up(0.0, 0.0, 10.0, 32643);
        let mut bands = vec![Grid::filled(2, 2, 0.1f32); 12];
        bands[3].set(1, 1, -0.5);
        assert!(RasterPatch::new(bands, t).is_err());
    }

    #[test]
    fn mask_rejects_non_binary_values() {
        let t = GeoTransform::north_up(0.0, 0.0, 10.0, 32643);
        assert!(LabelMask::new(Grid::filled(2, 2, 2u8), t).is_err());
    }

    #[test]
    fn categorical_requires_legend_coverage() {
        let t = GeoTransform::north_up(0.0, 0.0, 10.0, 32643);
        let legend = BTreeMap::from([(1u16, "Kharif Only".to_string())]);
        assert!(CategoricalRaster::new(Grid::filled(2, 2, 2u16), legend.clone(), t).is_err());
        assert!(CategoricalRaster::new(Grid::filled(2, 2, 1u16), legend, t).is_ok());
    }

    #[test]
    fn crop_shifts_transform() {
        let t = GeoTransform::north_up(100.0, 200.0, 10.0, 32643);
        let p = RasterPatch::uniform(8, 8, [0.2f32; 12], t).unwrap();
        let c = p.crop(2, 3, 4, 4);
        assert_eq!(c.transform().origin_x, 120.0);
        assert_eq!(c.transform().origin_y, 170.0);
        assert_eq!((c.width(), c.height()), (4, 4));
    }
}
