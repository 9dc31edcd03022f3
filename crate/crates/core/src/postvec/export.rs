use std::collections::HashMap;
use std::path::Path;

use serde_json::Value;

use super::{FarmGroup, FarmPolygon};
use crate::analysis::ValidationTag;
use crate::crs;
use crate::vector::{write_geojson, Coord, Feature, FeatureCollection, Geometry, Polygon};
use crate::{Error, Result};

/// Property names of an exported farm, in order.
pub const FARM_PROPERTIES: [&str; 5] = ["fid", "Area", "Latitude", "Longitude", "State"];
pub const UNKNOWN_STATE: &str = "unknown";

fn to_lonlat(poly: &Polygon, from: i32) -> Result<Polygon> {
    if from == 4326 {
        return Ok(poly.clone());
    }
    poly.try_map_coords(|c| {
        let (lon, lat) = crs::to_lonlat(from, c[0], c[1])?;
        Ok([lon, lat])
    })
}

/// Name of the first boundary containing `lonlat`, or `"unknown"`.
/// Boundaries carry their name in a `name` property.
pub fn state_of(lonlat: Coord, states: &FeatureCollection) -> Result<String> {
    for (i, f) in states.features.iter().enumerate() {
        if f.geometry.contains_point(lonlat) {
            return match f.properties.get("name") {
                Some(Value::String(s)) => Ok(s.clone()),
                _ => Err(Error::Argument(format!("state boundary {i} has no string `name` property"))),
            };
        }
    }
    Ok(UNKNOWN_STATE.to_string())
}

pub fn farms_to_geojson(groups: &[FarmGroup], states: &FeatureCollection) -> Result<FeatureCollection> {
    let features = groups
        .iter()
        .map(|g| {
            let parts = g.members.iter().map(|m| to_lonlat(&m.polygon, m.crs)).collect::<Result<Vec<_>>>()?;
            let state = match &g.state {
                Some(s) => s.clone(),
                None => state_of(g.centroid, states)?,
            };
            Ok(Feature::new(Geometry::MultiPolygon(parts))
                .with_property("fid", g.fid)
                .with_property("Area", g.area_m2)
                .with_property("Latitude", g.centroid[1])
                .with_property("Longitude", g.centroid[0])
                .with_property("State", state))
        })
        .collect::<Result<_>>()?;
    Ok(FeatureCollection::new(features))
}

/// Writes the farm database: one MultiPolygon feature per fid with exactly
/// the five schema properties.
pub fn export_farms(groups: &[FarmGroup], states: &FeatureCollection, path: &Path) -> Result<()> {
    write_geojson(&farms_to_geojson(groups, states)?, path)
}

/// Per-polygon predictions in WGS84, keeping what regrouping needs.
pub fn polygons_to_geojson(polys: &[FarmPolygon]) -> Result<FeatureCollection> {
    let features = polys
        .iter()
        .map(|p| {
            Ok(Feature::new(Geometry::Polygon(to_lonlat(&p.polygon, p.crs)?))
                .with_property("pid", p.id.clone())
                .with_property("pixel_count", p.pixel_count)
                .with_property("Area", p.area_m2)
                .with_property("crs", p.crs))
        })
        .collect::<Result<_>>()?;
    Ok(FeatureCollection::new(features))
}

/// Inverse of [`polygons_to_geojson`]. Geometry is projected back to the
/// recorded CRS, or to the UTM zone of its first vertex if none is given.
pub fn polygons_from_geojson(fc: &FeatureCollection) -> Result<Vec<FarmPolygon>> {
    fc.features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let prop = |k: &str| f.properties.get(k);
            let poly = match &f.geometry {
                Geometry::Polygon(p) => p,
                _ => return Err(Error::Parse(format!("prediction {i} is not a Polygon"))),
            };
            let id = match prop("pid") {
                Some(Value::String(s)) => s.clone(),
                Some(v) => v.to_string(),
                None => i.to_string(),
            };
            let target = match prop("crs").and_then(Value::as_i64) {
                Some(c) => c as i32,
                None => crs::utm_epsg_for(poly.exterior[0][0], poly.exterior[0][1]),
            };
            let projected = if target == 4326 {
                poly.clone()
            } else {
                poly.try_map_coords(|c| {
                    let (x, y) = crs::from_lonlat(target, c[0], c[1])?;
                    Ok([x, y])
                })?
            };
            let area_m2 = match prop("Area").and_then(Value::as_f64) {
                Some(a) => a,
                None if target != 4326 => projected.area(),
                None => return Err(Error::Parse(format!("prediction {i} has no Area"))),
            };
            let pixel_count = prop("pixel_count").and_then(Value::as_u64).unwrap_or(0) as usize;
            Ok(FarmPolygon { id, polygon: projected, crs: target, pixel_count, area_m2 })
        })
        .collect()
}

/// Drops polygons tagged invalid and sets rooftops aside. Untagged
/// polygons are kept.
pub fn split_by_tags(
    polys: Vec<FarmPolygon>,
    tags: &HashMap<String, ValidationTag>,
) -> (Vec<FarmPolygon>, Vec<FarmPolygon>) {
    let mut kept = Vec::new();
    let mut rooftop = Vec::new();
    for p in polys {
        match tags.get(&p.id) {
            Some(ValidationTag::Invalid) => {}
            Some(ValidationTag::Rooftop) => rooftop.push(p),
            _ => kept.push(p),
        }
    }
    (kept, rooftop)
}
