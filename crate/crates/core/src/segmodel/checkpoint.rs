//! Binary model checkpoint, little-endian:
//!
//! `SEGM`, u32 version, u32 radius, u8 flags (1 = NDSI, 2 = NDWI,
//! 4 = McFeeters NDWI), f64 index fill, f64 threshold, u32 n, n × f64
//! weights, f64 bias, u8 has-scaler, then n × f64 mean and n × f64 scale
//! when present.

use std::path::Path;

use super::{FeatureConfig, Scaler, SegModel};
use crate::raster::{IndexConfig, NdwiVariant};
use crate::{Error, Result, Scalar};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SEGM";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint<T: Scalar>(model: &SegModel<T>) -> Result<Vec<u8>> {
    model.validate()?;
    let f = &model.features;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(f.radius as u32).to_le_bytes());
    let flags = f.ndsi as u8 | (f.ndwi as u8) << 1 | ((f.indices.ndwi == NdwiVariant::Mcfeeters) as u8) << 2;
    out.push(flags);
    out.extend_from_slice(&f.indices.fill.to_le_bytes());
    out.extend_from_slice(&model.threshold.to_le_bytes());
    out.extend_from_slice(&(model.weights.len() as u32).to_le_bytes());
    let mut put = |v: T| out.extend_from_slice(&v.as_f64().to_le_bytes());
    model.weights.iter().for_each(|&w| put(w));
    put(model.bias);
    match &model.scaler {
        None => out.push(0),
        Some(s) => {
            out.push(1);
            for &v in s.mean.iter().chain(&s.scale) {
                out.extend_from_slice(&v.as_f64().to_le_bytes());
            }
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("checkpoint truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>> {
        (0..n).map(|_| self.f64().map(T::lit)).collect()
    }
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<SegModel<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a model checkpoint (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Unsupported(format!("checkpoint version {version}")));
    }
    let radius = r.u32()? as usize;
    let flags = r.u8()?;
    if flags & !7 != 0 {
        return Err(Error::Format(format!("unknown feature flags {flags:#x}")));
    }
    let fill = r.f64()?;
    let ndwi = if flags & 4 != 0 { NdwiVariant::Mcfeeters } else { NdwiVariant::Gao };
    let features = FeatureConfig { radius, ndsi: flags & 1 != 0, ndwi: flags & 2 != 0, indices: IndexConfig { ndwi, fill } };
    let threshold = r.f64()?;
    let n = r.u32()? as usize;
    if n != features.len() {
        return Err(Error::Format(format!("{n} weights stored for {} features", features.len())));
    }
    let weights = r.f64s(n)?;
    let bias = T::lit(r.f64()?);
    let scaler = match r.u8()? {
        0 => None,
        1 => Some(Scaler { mean: r.f64s(n)?, scale: r.f64s(n)? }),
        b => return Err(Error::Format(format!("bad scaler marker {b}"))),
    };
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    let model = SegModel { weights, bias, features, threshold, scaler };
    model.validate().map_err(|e| Error::Format(format!("checkpoint: {e}")))?;
    Ok(model)
}

pub fn save_checkpoint<T: Scalar>(model: &SegModel<T>, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(model)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<SegModel<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
