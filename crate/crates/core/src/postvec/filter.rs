use serde::{Deserialize, Serialize};

use crate::crs;
use crate::raster::{compute_index, GeoTransform, IndexConfig, IndexKind, LabelMask, RasterPatch};
use crate::vector::{point_segment_distance, BBox, Coord, FeatureCollection};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub ndsi_threshold: f64,
    pub ndwi_threshold: f64,
    pub road_buffer_m: f64,
    pub ndsi_enabled: bool,
    pub ndwi_enabled: bool,
    pub roads_enabled: bool,
    pub indices: IndexConfig,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            ndsi_threshold: 0.4,
            ndwi_threshold: 0.5,
            road_buffer_m: 20.0,
            ndsi_enabled: true,
            ndwi_enabled: true,
            roads_enabled: true,
            indices: IndexConfig::default(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        for t in [self.ndsi_threshold, self.ndwi_threshold] {
            if !(-1.0..=1.0).contains(&t) {
                return Err(Error::Argument(format!("index threshold {t} outside [-1, 1]")));
            }
        }
        if !(self.road_buffer_m >= 0.0 && self.road_buffer_m.is_finite()) {
            return Err(Error::Argument(format!("road buffer must be non-negative, got {}", self.road_buffer_m)));
        }
        Ok(())
    }
}

/// CRS in which distances are metres: the patch CRS when projected,
/// otherwise the UTM zone of the patch centre.
fn metric_crs(t: &GeoTransform, w: usize, h: usize) -> Result<i32> {
    if t.crs_code != 4326 {
        return Ok(t.crs_code);
    }
    let (lon, lat) = t.pixel_to_world(w as f64 / 2.0, h as f64 / 2.0);
    Ok(crs::utm_epsg_for(lon, lat))
}

fn reproject(from: i32, to: i32, c: Coord) -> Result<Coord> {
    if from == to {
        return Ok(c);
    }
    let (lon, lat) = crs::to_lonlat(from, c[0], c[1])?;
    let (x, y) = crs::from_lonlat(to, lon, lat)?;
    Ok([x, y])
}

/// Road segments (in `target` CRS) whose bounding box comes within
/// `buffer` of `area`.
fn road_segments(roads: &FeatureCollection, target: i32, area: &BBox, buffer: f64) -> Result<Vec<(Coord, Coord)>> {
    let mut out = Vec::new();
    for f in &roads.features {
        for line in f.geometry.lines() {
            let pts: Vec<Coord> = line.iter().map(|&c| reproject(4326, target, c)).collect::<Result<_>>()?;
            for w in pts.windows(2) {
                let mut b = BBox::empty();
                b.extend(w[0]);
                b.extend(w[1]);
                if b.distance(area) <= buffer {
                    out.push((w[0], w[1]));
                }
            }
            if let [p] = pts.as_slice() {
                out.push((*p, *p));
            }
        }
        if let crate::vector::Geometry::Point(c) = f.geometry {
            out.push((reproject(4326, target, c)?, reproject(4326, target, c)?));
        }
    }
    Ok(out)
}

/// Clears predicted pixels over snow, water or near roads.
///
/// Roads are WGS84 longitude/latitude geometries. A pixel is dropped when
/// NDSI or NDWI exceeds its threshold, or its centre is within
/// `road_buffer_m` of any road. The output is a subset of the input.
pub fn filter_mask<T: Scalar>(
    mask: &LabelMask,
    patch: &RasterPatch<T>,
    roads: &FeatureCollection,
    cfg: &FilterConfig,
) -> Result<LabelMask> {
    cfg.validate()?;
    if mask.width() != patch.width() || mask.height() != patch.height() {
        return Err(Error::Dimension("mask and patch differ in shape".into()));
    }
    if mask.transform() != patch.transform() {
        return Err(Error::Argument("mask and patch are not co-registered".into()));
    }
    let (w, h) = (mask.width(), mask.height());
    let mut out = mask.clone();
    let ndsi = cfg.ndsi_enabled.then(|| compute_index(patch, IndexKind::Ndsi, &cfg.indices));
    let ndwi = cfg.ndwi_enabled.then(|| compute_index(patch, IndexKind::Ndwi, &cfg.indices));

    let t = *mask.transform();
    let target = metric_crs(&t, w, h)?;
    let segments = if cfg.roads_enabled && !roads.is_empty() {
        let mut area = BBox::empty();
        let b = t.bounds(w, h);
        for c in [[b[0], b[1]], [b[2], b[3]], [b[0], b[3]], [b[2], b[1]]] {
            area.extend(reproject(t.crs_code, target, c)?);
        }
        road_segments(roads, target, &area, cfg.road_buffer_m)?
    } else {
        Vec::new()
    };

    for row in 0..h {
        for col in 0..w {
            if !mask.get(row, col) {
                continue;
            }
            let over_index = ndsi.as_ref().is_some_and(|g| g.get(row, col).as_f64() > cfg.ndsi_threshold)
                || ndwi.as_ref().is_some_and(|g| g.get(row, col).as_f64() > cfg.ndwi_threshold);
            let near_road = !segments.is_empty() && {
                let p = reproject(t.crs_code, target, t.pixel_center(col, row).into())?;
                segments.iter().any(|&(a, b)| point_segment_distance(p, a, b) <= cfg.road_buffer_m)
            };
            if over_index || near_road {
                out.set(row, col, false);
            }
        }
    }
    Ok(out)
}
