//! Minimal GeoTIFF codec.
//!
//! Reads classic (non-Big) TIFF, either byte order, uncompressed or deflate,
//! stripped or tiled, pixel- or band-interleaved, with 8/16/32/64-bit
//! integer or float samples. Georeferencing comes from ModelPixelScale,
//! ModelTiepoint and the EPSG code in the GeoKey directory. Anything else
//! (BigTIFF, JPEG/LZW, predictors, rotated models) fails with
//! [`Error::Unsupported`].

use std::io::{Read, Write};
use std::path::Path;

use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;

use super::{BandStack, GeoTransform};
use crate::{Error, Result};

const TAG_WIDTH: u16 = 256;
const TAG_HEIGHT: u16 = 257;
const TAG_BITS: u16 = 258;
const TAG_COMPRESSION: u16 = 259;
const TAG_PHOTOMETRIC: u16 = 262;
const TAG_STRIP_OFFSETS: u16 = 273;
const TAG_SAMPLES: u16 = 277;
const TAG_ROWS_PER_STRIP: u16 = 278;
const TAG_STRIP_BYTES: u16 = 279;
const TAG_PLANAR: u16 = 284;
const TAG_PREDICTOR: u16 = 317;
const TAG_TILE_WIDTH: u16 = 322;
const TAG_TILE_HEIGHT: u16 = 323;
const TAG_TILE_OFFSETS: u16 = 324;
const TAG_TILE_BYTES: u16 = 325;
const TAG_SAMPLE_FORMAT: u16 = 339;
const TAG_PIXEL_SCALE: u16 = 33550;
const TAG_TIEPOINT: u16 = 33922;
const TAG_GEOKEYS: u16 = 34735;

const KEY_GEOGRAPHIC_TYPE: u16 = 2048;
const KEY_PROJECTED_TYPE: u16 = 3072;

const TYPE_SHORT: u16 = 3;
const TYPE_LONG: u16 = 4;
const TYPE_DOUBLE: u16 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiffSampleType {
    U8,
    F32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiffCompression {
    None,
    Deflate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiffLayout {
    /// One strip group per band, `rows_per_strip` rows each.
    PlanarStrips { rows_per_strip: usize },
    PlanarTiles { tile: usize },
    ChunkyStrips { rows_per_strip: usize },
    ChunkyTiles { tile: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct TiffWriteOptions {
    pub sample_type: TiffSampleType,
    pub compression: TiffCompression,
    pub layout: TiffLayout,
}

impl Default for TiffWriteOptions {
    fn default() -> Self {
        TiffWriteOptions {
            sample_type: TiffSampleType::F32,
            compression: TiffCompression::Deflate,
            layout: TiffLayout::PlanarStrips { rows_per_strip: 64 },
        }
    }
}

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    endian: Endian,
}

impl<'a> Cursor<'a> {
    fn slice(&self, offset: usize, len: usize) -> Result<&'a [u8]> {
        offset
            .checked_add(len)
            .and_then(|end| self.bytes.get(offset..end))
            .ok_or_else(|| Error::Format(format!("TIFF read past end at offset {offset}")))
    }

    fn u16(&self, offset: usize) -> Result<u16> {
        let b: [u8; 2] = self.slice(offset, 2)?.try_into().unwrap();
        Ok(match self.endian {
            Endian::Little => u16::from_le_bytes(b),
            Endian::Big => u16::from_be_bytes(b),
        })
    }

    fn u32(&self, offset: usize) -> Result<u32> {
        let b: [u8; 4] = self.slice(offset, 4)?.try_into().unwrap();
        Ok(match self.endian {
            Endian::Little => u32::from_le_bytes(b),
            Endian::Big => u32::from_be_bytes(b),
        })
    }

    fn u64(&self, offset: usize) -> Result<u64> {
        let b: [u8; 8] = self.slice(offset, 8)?.try_into().unwrap();
        Ok(match self.endian {
            Endian::Little => u64::from_le_bytes(b),
            Endian::Big => u64::from_be_bytes(b),
        })
    }
}

struct Entry {
    tag: u16,
    typ: u16,
    count: usize,
    /// Offset of the value bytes (inline or out-of-line).
    value_offset: usize,
}

fn type_size(typ: u16) -> Result<usize> {
    Ok(match typ {
        1 | 2 | 6 | 7 => 1,
        3 | 8 => 2,
        4 | 9 | 11 => 4,
        5 | 10 | 12 => 8,
        16..=18 => return Err(Error::Unsupported("BigTIFF field types".into())),
        t => return Err(Error::Format(format!("unknown TIFF field type {t}"))),
    })
}

impl Entry {
    fn values_u64(&self, c: &Cursor) -> Result<Vec<u64>> {
        (0..self.count)
            .map(|i| {
                Ok(match self.typ {
                    1 | 7 => c.slice(self.value_offset + i, 1)?[0] as u64,
                    3 => c.u16(self.value_offset + 2 * i)? as u64,
                    4 => c.u32(self.value_offset + 4 * i)? as u64,
                    t => return Err(Error::Format(format!("tag {} has non-integer type {t}", self.tag))),
                })
            })
            .collect()
    }

    fn values_f64(&self, c: &Cursor) -> Result<Vec<f64>> {
        match self.typ {
            12 => (0..self.count).map(|i| Ok(f64::from_bits(c.u64(self.value_offset + 8 * i)?))).collect(),
            11 => (0..self.count)
                .map(|i| Ok(f32::from_bits(c.u32(self.value_offset + 4 * i)?) as f64))
                .collect(),
            _ => Ok(self.values_u64(c)?.into_iter().map(|v| v as f64).collect()),
        }
    }
}

struct Ifd {
    entries: Vec<Entry>,
}

impl Ifd {
    fn find(&self, tag: u16) -> Option<&Entry> {
        self.entries.iter().find(|e| e.tag == tag)
    }

    fn scalar(&self, c: &Cursor, tag: u16) -> Result<Option<u64>> {
        match self.find(tag) {
            Some(e) => Ok(e.values_u64(c)?.first().copied()),
            None => Ok(None),
        }
    }

    fn required(&self, c: &Cursor, tag: u16) -> Result<u64> {
        self.scalar(c, tag)?.ok_or_else(|| Error::Format(format!("missing TIFF tag {tag}")))
    }

    fn list(&self, c: &Cursor, tag: u16) -> Result<Option<Vec<u64>>> {
        self.find(tag).map(|e| e.values_u64(c)).transpose()
    }
}

fn parse_ifd(c: &Cursor, offset: usize) -> Result<Ifd> {
    let n = c.u16(offset)? as usize;
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let base = offset + 2 + 12 * i;
        let tag = c.u16(base)?;
        let typ = c.u16(base + 2)?;
        let count = c.u32(base + 4)? as usize;
        let size = type_size(typ)?
            .checked_mul(count)
            .ok_or_else(|| Error::Format("TIFF field size overflows".into()))?;
        let value_offset = if size <= 4 { base + 8 } else { c.u32(base + 8)? as usize };
        c.slice(value_offset, size)?;
        entries.push(Entry { tag, typ, count, value_offset });
    }
    Ok(Ifd { entries })
}

#[derive(Clone, Copy)]
enum SampleKind {
    Uint,
    Int,
    Float,
}

fn decode_sample(bytes: &[u8], kind: SampleKind, endian: Endian) -> f64 {
    macro_rules! num {
        ($t:ty) => {{
            let b = bytes.try_into().unwrap();
            match endian {
                Endian::Little => <$t>::from_le_bytes(b),
                Endian::Big => <$t>::from_be_bytes(b),
            }
        }};
    }
    match (kind, bytes.len()) {
        (SampleKind::Uint, 1) => bytes[0] as f64,
        (SampleKind::Int, 1) => bytes[0] as i8 as f64,
        (SampleKind::Uint, 2) => num!(u16) as f64,
        (SampleKind::Int, 2) => num!(i16) as f64,
        (SampleKind::Uint, 4) => num!(u32) as f64,
        (SampleKind::Int, 4) => num!(i32) as f64,
        (SampleKind::Float, 4) => num!(f32) as f64,
        (SampleKind::Float, 8) => num!(f64),
        (SampleKind::Uint, 8) => num!(u64) as f64,
        (SampleKind::Int, 8) => num!(i64) as f64,
        _ => f64::NAN,
    }
}

fn inflate(raw: &[u8], expected: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(expected);
    ZlibDecoder::new(raw)
        .read_to_end(&mut out)
        .map_err(|e| Error::Format(format!("deflate stream: {e}")))?;
    Ok(out)
}

pub fn decode_geotiff(bytes: &[u8]) -> Result<BandStack> {
    if bytes.len() < 8 {
        return Err(Error::Format("TIFF header truncated".into()));
    }
    let endian = match &bytes[..2] {
        b"II" => Endian::Little,
        b"MM" => Endian::Big,
        _ => return Err(Error::Format("not a TIFF file".into())),
    };
    let c = Cursor { bytes, endian };
    match c.u16(2)? {
        42 => {}
        43 => return Err(Error::Unsupported("BigTIFF".into())),
        v => return Err(Error::Format(format!("bad TIFF version {v}"))),
    }
    let ifd = parse_ifd(&c, c.u32(4)? as usize)?;

    let width = ifd.required(&c, TAG_WIDTH)? as usize;
    let height = ifd.required(&c, TAG_HEIGHT)? as usize;
    let spp = ifd.scalar(&c, TAG_SAMPLES)?.unwrap_or(1) as usize;
    if width == 0 || height == 0 || spp == 0 {
        return Err(Error::Format("TIFF has empty shape".into()));
    }
    let bits = ifd.list(&c, TAG_BITS)?.unwrap_or_else(|| vec![1]);
    if bits.iter().any(|&b| b != bits[0]) {
        return Err(Error::Unsupported("mixed bits per sample".into()));
    }
    let sample_bytes = match bits[0] {
        8 | 16 | 32 | 64 => bits[0] as usize / 8,
        b => return Err(Error::Unsupported(format!("{b}-bit samples"))),
    };
    let kind = match ifd.scalar(&c, TAG_SAMPLE_FORMAT)?.unwrap_or(1) {
        1 => SampleKind::Uint,
        2 => SampleKind::Int,
        3 if sample_bytes >= 4 => SampleKind::Float,
        f => return Err(Error::Unsupported(format!("sample format {f} at {} bits", bits[0]))),
    };
    let deflate = match ifd.scalar(&c, TAG_COMPRESSION)?.unwrap_or(1) {
        1 => false,
        8 | 32946 => true,
        7 => return Err(Error::Unsupported("JPEG compression".into())),
        m => return Err(Error::Unsupported(format!("compression method {m}"))),
    };
    if ifd.scalar(&c, TAG_PREDICTOR)?.unwrap_or(1) != 1 {
        return Err(Error::Unsupported("TIFF predictors".into()));
    }
    let planar = match ifd.scalar(&c, TAG_PLANAR)?.unwrap_or(1) {
        1 => false,
        2 => true,
        p => return Err(Error::Format(format!("planar configuration {p}"))),
    };

    // Chunk geometry: (chunk width, chunk height, chunks across, chunks down).
    let (cw, ch, offsets, counts) = if let Some(tw) = ifd.scalar(&c, TAG_TILE_WIDTH)? {
        let th = ifd.required(&c, TAG_TILE_HEIGHT)?;
        let offsets = ifd.list(&c, TAG_TILE_OFFSETS)?.ok_or_else(|| Error::Format("missing tile offsets".into()))?;
        let counts = ifd.list(&c, TAG_TILE_BYTES)?.ok_or_else(|| Error::Format("missing tile byte counts".into()))?;
        (tw as usize, th as usize, offsets, counts)
    } else {
        let rps = (ifd.scalar(&c, TAG_ROWS_PER_STRIP)?.unwrap_or(height as u64) as usize).min(height);
        let offsets = ifd.list(&c, TAG_STRIP_OFFSETS)?.ok_or_else(|| Error::Format("missing strip offsets".into()))?;
        let counts = ifd.list(&c, TAG_STRIP_BYTES)?.ok_or_else(|| Error::Format("missing strip byte counts".into()))?;
        (width, rps, offsets, counts)
    };
    if cw == 0 || ch == 0 {
        return Err(Error::Format("zero chunk size".into()));
    }
    let across = width.div_ceil(cw);
    let down = height.div_ceil(ch);
    let planes = if planar { spp } else { 1 };
    let per_chunk_samples = if planar { 1 } else { spp };
    if offsets.len() != across * down * planes || counts.len() != offsets.len() {
        return Err(Error::Format(format!(
            "expected {} chunks, found {} offsets / {} byte counts",
            across * down * planes,
            offsets.len(),
            counts.len()
        )));
    }

    let mut bands = vec![vec![0f32; width * height]; spp];
    let is_tiled = ifd.find(TAG_TILE_WIDTH).is_some();
    for plane in 0..planes {
        for cy in 0..down {
            for cx in 0..across {
                let idx = plane * across * down + cy * across + cx;
                let raw = c.slice(offsets[idx] as usize, counts[idx] as usize)?;
                let rows = if is_tiled { ch } else { ch.min(height - cy * ch) };
                let expected = cw * rows * per_chunk_samples * sample_bytes;
                let data = if deflate { inflate(raw, expected)? } else { raw.to_vec() };
                if data.len() < expected {
                    return Err(Error::Format(format!("chunk {idx} holds {} bytes, expected {expected}", data.len())));
                }
                for r in 0..rows {
                    let row = cy * ch + r;
                    if row >= height {
                        break;
                    }
                    for col_in in 0..cw {
                        let col = cx * cw + col_in;
                        if col >= width {
                            break;
                        }
                        for s in 0..per_chunk_samples {
                            let o = ((r * cw + col_in) * per_chunk_samples + s) * sample_bytes;
                            let v = decode_sample(&data[o..o + sample_bytes], kind, endian);
                            let band = if planar { plane } else { s };
                            bands[band][row * width + col] = v as f32;
                        }
                    }
                }
            }
        }
    }

    let transform = read_georeference(&ifd, &c)?;
    Ok(BandStack { width, height, bands, transform })
}

fn read_georeference(ifd: &Ifd, c: &Cursor) -> Result<GeoTransform> {
    let scale = ifd
        .find(TAG_PIXEL_SCALE)
        .map(|e| e.values_f64(c))
        .transpose()?
        .ok_or_else(|| Error::Format("missing ModelPixelScale tag".into()))?;
    let tie = ifd
        .find(TAG_TIEPOINT)
        .map(|e| e.values_f64(c))
        .transpose()?
        .ok_or_else(|| Error::Format("missing ModelTiepoint tag".into()))?;
    if scale.len() < 2 || tie.len() < 6 {
        return Err(Error::Format("short georeference tags".into()));
    }
    let mut epsg = 0i32;
    if let Some(keys) = ifd.list(c, TAG_GEOKEYS)? {
        let n = keys.get(3).copied().unwrap_or(0) as usize;
        let mut geographic = None;
        for k in 0..n {
            let base = 4 + 4 * k;
            if base + 3 >= keys.len() {
                break;
            }
            // Only short values stored inline (location 0) carry EPSG codes.
            if keys[base + 1] != 0 {
                continue;
            }
            match keys[base] as u16 {
                KEY_PROJECTED_TYPE => epsg = keys[base + 3] as i32,
                KEY_GEOGRAPHIC_TYPE => geographic = Some(keys[base + 3] as i32),
                _ => {}
            }
        }
        if epsg == 0 {
            epsg = geographic.unwrap_or(0);
        }
    }
    let (sx, sy) = (scale[0], scale[1]);
    GeoTransform::new(tie[3] - tie[0] * sx, tie[4] + tie[1] * sy, sx, -sy, epsg)
}

pub fn read_geotiff(path: &Path) -> Result<BandStack> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_geotiff(&bytes)
}

struct OutEntry {
    tag: u16,
    typ: u16,
    count: u32,
    data: Vec<u8>,
}

fn shorts(tag: u16, v: &[u16]) -> OutEntry {
    OutEntry { tag, typ: TYPE_SHORT, count: v.len() as u32, data: v.iter().flat_map(|x| x.to_le_bytes()).collect() }
}

fn longs(tag: u16, v: &[u32]) -> OutEntry {
    OutEntry { tag, typ: TYPE_LONG, count: v.len() as u32, data: v.iter().flat_map(|x| x.to_le_bytes()).collect() }
}

fn doubles(tag: u16, v: &[f64]) -> OutEntry {
    OutEntry { tag, typ: TYPE_DOUBLE, count: v.len() as u32, data: v.iter().flat_map(|x| x.to_le_bytes()).collect() }
}

pub fn encode_geotiff(stack: &BandStack, opts: &TiffWriteOptions) -> Result<Vec<u8>> {
    stack.validate()?;
    let t = &stack.transform;
    if t.pixel_size_y >= 0.0 {
        return Err(Error::Unsupported("GeoTIFF output requires north-up rasters".into()));
    }
    let (w, h, spp) = (stack.width, stack.height, stack.bands.len());
    let sample_bytes = match opts.sample_type {
        TiffSampleType::U8 => 1,
        TiffSampleType::F32 => 4,
    };
    let push_sample = |buf: &mut Vec<u8>, v: f32| match opts.sample_type {
        TiffSampleType::U8 => buf.push(v.clamp(0.0, 255.0).round() as u8),
        TiffSampleType::F32 => buf.extend_from_slice(&v.to_le_bytes()),
    };
    let (planar, tiled, cw, ch) = match opts.layout {
        TiffLayout::PlanarStrips { rows_per_strip } => (true, false, w, rows_per_strip.clamp(1, h)),
        TiffLayout::ChunkyStrips { rows_per_strip } => (false, false, w, rows_per_strip.clamp(1, h)),
        TiffLayout::PlanarTiles { tile } => (true, true, tile, tile),
        TiffLayout::ChunkyTiles { tile } => (false, true, tile, tile),
    };
    if tiled && (cw == 0 || cw % 16 != 0) {
        return Err(Error::Argument("tile size must be a positive multiple of 16".into()));
    }
    let across = w.div_ceil(cw);
    let down = h.div_ceil(ch);
    let planes = if planar { spp } else { 1 };

    let mut chunks = Vec::with_capacity(planes * across * down);
    for plane in 0..planes {
        for cy in 0..down {
            for cx in 0..across {
                let rows = if tiled { ch } else { ch.min(h - cy * ch) };
                let mut buf = Vec::with_capacity(cw * rows * sample_bytes * if planar { 1 } else { spp });
                for r in 0..rows {
                    for ci in 0..cw {
                        let (row, col) = (cy * ch + r, cx * cw + ci);
                        let inside = row < h && col < w;
                        let bands = if planar { plane..plane + 1 } else { 0..spp };
                        for b in bands {
                            push_sample(&mut buf, if inside { stack.bands[b][row * w + col] } else { 0.0 });
                        }
                    }
                }
                if opts.compression == TiffCompression::Deflate {
                    let mut enc = ZlibEncoder::new(Vec::new(), flate2::Compression::default());
                    enc.write_all(&buf).and_then(|_| enc.finish()).map(|z| buf = z).map_err(|e| {
                        Error::Format(format!("deflate failed: {e}"))
                    })?;
                }
                chunks.push(buf);
            }
        }
    }

    let mut out = Vec::new();
    out.extend_from_slice(b"II");
    out.extend_from_slice(&42u16.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    let mut offsets = Vec::with_capacity(chunks.len());
    for chunk in &chunks {
        offsets.push(out.len() as u32);
        out.extend_from_slice(chunk);
        if out.len() % 2 == 1 {
            out.push(0);
        }
    }
    let byte_counts: Vec<u32> = chunks.iter().map(|c| c.len() as u32).collect();

    let spp16 = spp as u16;
    let (bits, format) = match opts.sample_type {
        TiffSampleType::U8 => (8u16, 1u16),
        TiffSampleType::F32 => (32, 3),
    };
    let epsg = t.crs_code;
    let geokeys: Vec<u16> = if epsg == 4326 || (4000..5000).contains(&epsg) {
        vec![1, 1, 0, 3, 1024, 0, 1, 2, 1025, 0, 1, 1, KEY_GEOGRAPHIC_TYPE, 0, 1, epsg as u16]
    } else {
        vec![1, 1, 0, 3, 1024, 0, 1, 1, 1025, 0, 1, 1, KEY_PROJECTED_TYPE, 0, 1, epsg.clamp(0, u16::MAX as i32) as u16]
    };
    let mut entries = vec![
        longs(TAG_WIDTH, &[w as u32]),
        longs(TAG_HEIGHT, &[h as u32]),
        shorts(TAG_BITS, &vec![bits; spp]),
        shorts(TAG_COMPRESSION, &[if opts.compression == TiffCompression::Deflate { 8 } else { 1 }]),
        shorts(TAG_PHOTOMETRIC, &[1]),
        shorts(TAG_SAMPLES, &[spp16]),
        shorts(TAG_PLANAR, &[if planar { 2 } else { 1 }]),
        shorts(TAG_SAMPLE_FORMAT, &vec![format; spp]),
        doubles(TAG_PIXEL_SCALE, &[t.pixel_size_x, -t.pixel_size_y, 0.0]),
        doubles(TAG_TIEPOINT, &[0.0, 0.0, 0.0, t.origin_x, t.origin_y, 0.0]),
        shorts(TAG_GEOKEYS, &geokeys),
    ];
    if tiled {
        entries.extend([
            longs(TAG_TILE_WIDTH, &[cw as u32]),
            longs(TAG_TILE_HEIGHT, &[ch as u32]),
            longs(TAG_TILE_OFFSETS, &offsets),
            longs(TAG_TILE_BYTES, &byte_counts),
        ]);
    } else {
        entries.extend([
            longs(TAG_STRIP_OFFSETS, &offsets),
            longs(TAG_ROWS_PER_STRIP, &[ch as u32]),
            longs(TAG_STRIP_BYTES, &byte_counts),
        ]);
    }
    entries.sort_by_key(|e| e.tag);

    let ifd_offset = out.len();
    out[4..8].copy_from_slice(&(ifd_offset as u32).to_le_bytes());
    let mut extra_offset = ifd_offset + 2 + 12 * entries.len() + 4;
    let mut extra = Vec::new();
    out.extend_from_slice(&(entries.len() as u16).to_le_bytes());
    for e in &entries {
        out.extend_from_slice(&e.tag.to_le_bytes());
        out.extend_from_slice(&e.typ.to_le_bytes());
        out.extend_from_slice(&e.count.to_le_bytes());
        if e.data.len() <= 4 {
            let mut inline = [0u8; 4];
            inline[..e.data.len()].copy_from_slice(&e.data);
            out.extend_from_slice(&inline);
        } else {
            out.extend_from_slice(&(extra_offset as u32).to_le_bytes());
            extra.extend_from_slice(&e.data);
            extra_offset += e.data.len();
            if extra_offset % 2 == 1 {
                extra.push(0);
                extra_offset += 1;
            }
        }
    }
    out.extend_from_slice(&0u32.to_le_bytes());
    out.extend_from_slice(&extra);
    Ok(out)
}

pub fn write_geotiff(stack: &BandStack, path: &Path, opts: &TiffWriteOptions) -> Result<()> {
    let bytes = encode_geotiff(stack, opts)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
