//! `rgrid` fixture format.
//!
//! Little-endian layout:
//!
//! | bytes | content                                      |
//! |-------|----------------------------------------------|
//! | 4     | magic `RGRD`                                 |
//! | 4     | u32 width                                    |
//! | 4     | u32 height                                   |
//! | 4     | u32 band count                               |
//! | 48    | 6 × f64 geotransform, GDAL order             |
//! | 4     | i32 EPSG code                                |
//! | …     | band-major, row-major f32 pixels             |

use std::path::Path;

use super::{BandStack, GeoTransform};
use crate::{Error, Result};

pub const RGRID_MAGIC: &[u8; 4] = b"RGRD";
const HEADER_LEN: usize = 4 + 4 * 3 + 8 * 6 + 4;

pub fn encode_rgrid(stack: &BandStack) -> Result<Vec<u8>> {
    stack.validate()?;
    let n = stack.width * stack.height;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * n * stack.bands.len());
    out.extend_from_slice(RGRID_MAGIC);
    for v in [stack.width, stack.height, stack.bands.len()] {
        let v = u32::try_from(v).map_err(|_| Error::Dimension("rgrid dimension exceeds u32".into()))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in stack.transform.to_gdal() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&stack.transform.crs_code.to_le_bytes());
    for band in &stack.bands {
        for v in band {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_rgrid(bytes: &[u8]) -> Result<BandStack> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != RGRID_MAGIC {
        return Err(Error::Format("not an rgrid file (bad magic or truncated header)".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let (width, height, count) = (u32_at(4), u32_at(8), u32_at(12));
    if width == 0 || height == 0 || count == 0 {
        return Err(Error::Format(format!("rgrid header has empty shape {width}x{height}x{count}")));
    }
    let mut gt = [0.0; 6];
    for (i, v) in gt.iter_mut().enumerate() {
        *v = f64_at(16 + 8 * i);
    }
    let epsg = i32::from_le_bytes(bytes[64..68].try_into().unwrap());
    let transform = GeoTransform::from_gdal(gt, epsg).map_err(|e| Error::Format(format!("rgrid header: {e}")))?;

    let n = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(count))
        .ok_or_else(|| Error::Format("rgrid shape overflows".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != 4 * n {
        return Err(Error::Format(format!("rgrid payload is {} bytes, expected {}", payload.len(), 4 * n)));
    }
    let per_band = width * height;
    let bands = payload
        .chunks_exact(4 * per_band)
        .map(|b| b.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
        .collect();
    Ok(BandStack { width, height, bands, transform })
}

pub fn read_rgrid(path: &Path) -> Result<BandStack> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_rgrid(&bytes)
}

pub fn write_rgrid(stack: &BandStack, path: &Path) -> Result<()> {
    let bytes = encode_rgrid(stack)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
