//! 8-bit RGB renderings for the labeling service.

use super::{Grid, RasterPatch, BAND_BLUE, BAND_GREEN, BAND_RED};
use crate::{Error, Result, Scalar};

/// Interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let o = 3 * (row * self.width + col);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }
}

/// Natural-colour band triplet (B4, B3, B2).
pub const TRUE_COLOR: [usize; 3] = [BAND_RED, BAND_GREEN, BAND_BLUE];

/// Fixed class colours: background blue, solar yellow, other grey, then extras.
pub const CLASS_PALETTE: [[u8; 3]; 8] = [
    [31, 119, 180],
    [255, 215, 0],
    [150, 150, 150],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [23, 190, 207],
];

/// Colour for a cluster id: golden-angle hue walk at fixed saturation/value.
pub fn cluster_color(id: usize) -> [u8; 3] {
    let hue = (id as f64 * 137.507_764_050_037_85) % 360.0;
    hsv_to_rgb(hue, 0.65, 0.95)
}

pub fn class_color(id: usize) -> [u8; 3] {
    CLASS_PALETTE.get(id).copied().unwrap_or_else(|| cluster_color(id))
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let x = c * (1.0 - ((h / 60.0) % 2.0 - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match (h / 60.0) as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [((r + m) * 255.0).round() as u8, ((g + m) * 255.0).round() as u8, ((b + m) * 255.0).round() as u8]
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (i, f) = (pos.floor() as usize, pos.fract());
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] * (1.0 - f) + sorted[j] * f
}

/// Renders three bands with a per-band linear percentile stretch.
pub fn render_rgb<T: Scalar>(patch: &RasterPatch<T>, bands: [usize; 3], low_pct: f64, high_pct: f64) -> RgbImage {
    let (w, h) = (patch.width(), patch.height());
    let mut data = vec![0u8; 3 * w * h];
    for (ch, &b) in bands.iter().enumerate() {
        let values: Vec<f64> = patch.band(b).data().iter().map(|v| v.as_f64()).collect();
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let lo = percentile(&sorted, low_pct);
        let hi = percentile(&sorted, high_pct);
        let span = if hi > lo { hi - lo } else { 1.0 };
        for (i, v) in values.iter().enumerate() {
            data[3 * i + ch] = (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8;
        }
    }
    RgbImage { width: w, height: h, data }
}

/// Colour-codes an id grid (clusters or classes).
pub fn render_ids<I: Copy + Into<u32>>(ids: &Grid<I>, color: impl Fn(usize) -> [u8; 3]) -> RgbImage {
    let mut data = Vec::with_capacity(3 * ids.len());
    for &id in ids.data() {
        data.extend_from_slice(&color(id.into() as usize));
    }
    RgbImage { width: ids.width(), height: ids.height(), data }
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(|e| Error::Format(format!("png: {e}")))?;
        writer.write_image_data(&img.data).map_err(|e| Error::Format(format!("png: {e}")))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoTransform;

    #[test]
    fn stretch_maps_extremes_to_full_range() {
        let t = GeoTransform::north_up(0.0, 0.0, 10.0, 32643);
        let mut p = RasterPatch::uniform(4, 1, [0.1f32; 12], t).unwrap();
        for col in 0..4 {
            let mut s = [0.1f32; 12];
            for b in TRUE_COLOR {
                s[b] = col as f32 * 0.1;
            }
            p.set_pixel(0, col, &s);
        }
        let img = render_rgb(&p, TRUE_COLOR, 0.0, 100.0);
        assert_eq!(img.pixel(0, 0), [0, 0, 0]);
        assert_eq!(img.pixel(0, 3), [255, 255, 255]);
    }

    #[test]
    fn palette_is_deterministic_and_png_decodes() {
        assert_eq!(cluster_color(7), cluster_color(7));
        assert_ne!(cluster_color(1), cluster_color(2));
        assert_eq!(class_color(1), [255, 215, 0]);
        let ids = Grid::from_fn(5, 3, |r, c| (r * 5 + c) as u16);
        let png_bytes = encode_png(&render_ids(&ids, cluster_color)).unwrap();
        let decoder = png::Decoder::new(std::io::Cursor::new(png_bytes));
        let reader = decoder.read_info().unwrap();
        assert_eq!((reader.info().width, reader.info().height), (5, 3));
    }
}
