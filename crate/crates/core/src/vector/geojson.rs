//! RFC 7946 GeoJSON for the geometry types the pipeline exchanges.

use std::path::Path;

use serde_json::{json, Map, Value};

use super::{Coord, Feature, FeatureCollection, Geometry, Polygon};
use crate::{Error, Result};

fn parse_position(v: &Value) -> Result<Coord> {
    let arr = v.as_array().ok_or_else(|| Error::Parse("position is not an array".into()))?;
    if arr.len() < 2 {
        return Err(Error::Parse("position needs two coordinates".into()));
    }
    let x = arr[0].as_f64().ok_or_else(|| Error::Parse("non-numeric coordinate".into()))?;
    let y = arr[1].as_f64().ok_or_else(|| Error::Parse("non-numeric coordinate".into()))?;
    Ok([x, y])
}

fn parse_line(v: &Value) -> Result<Vec<Coord>> {
    v.as_array()
        .ok_or_else(|| Error::Parse("expected an array of positions".into()))?
        .iter()
        .map(parse_position)
        .collect()
}

fn parse_polygon(v: &Value) -> Result<Polygon> {
    let rings = v.as_array().ok_or_else(|| Error::Parse("polygon coordinates must be an array".into()))?;
    let mut rings = rings.iter().map(parse_line);
    let exterior = rings.next().ok_or_else(|| Error::Parse("polygon has no rings".into()))??;
    Polygon::new(exterior, rings.collect::<Result<_>>()?)
}

fn parse_geometry(v: &Value) -> Result<Geometry> {
    let kind = v.get("type").and_then(Value::as_str).ok_or_else(|| Error::Parse("geometry without type".into()))?;
    let coords = v.get("coordinates").ok_or_else(|| Error::Parse("geometry without coordinates".into()))?;
    Ok(match kind {
        "Point" => Geometry::Point(parse_position(coords)?),
        "LineString" => {
            let l = parse_line(coords)?;
            if l.len() < 2 {
                return Err(Error::Parse("LineString needs two positions".into()));
            }
            Geometry::LineString(l)
        }
        "MultiLineString" => Geometry::MultiLineString(
            coords
                .as_array()
                .ok_or_else(|| Error::Parse("MultiLineString coordinates must be an array".into()))?
                .iter()
                .map(parse_line)
                .collect::<Result<_>>()?,
        ),
        "Polygon" => Geometry::Polygon(parse_polygon(coords)?),
        "MultiPolygon" => Geometry::MultiPolygon(
            coords
                .as_array()
                .ok_or_else(|| Error::Parse("MultiPolygon coordinates must be an array".into()))?
                .iter()
                .map(parse_polygon)
                .collect::<Result<_>>()?,
        ),
        other => return Err(Error::Parse(format!("unsupported geometry type {other}"))),
    })
}

fn line_json(l: &[Coord]) -> Value {
    Value::Array(l.iter().map(|c| json!([c[0], c[1]])).collect())
}

fn polygon_json(p: &Polygon) -> Value {
    Value::Array(p.rings().map(|r| line_json(r)).collect())
}

fn geometry_json(g: &Geometry) -> Value {
    match g {
        Geometry::Point(c) => json!({"type": "Point", "coordinates": [c[0], c[1]]}),
        Geometry::LineString(l) => json!({"type": "LineString", "coordinates": line_json(l)}),
        Geometry::MultiLineString(ls) => {
            json!({"type": "MultiLineString", "coordinates": ls.iter().map(|l| line_json(l)).collect::<Vec<_>>()})
        }
        Geometry::Polygon(p) => json!({"type": "Polygon", "coordinates": polygon_json(p)}),
        Geometry::MultiPolygon(ps) => {
            json!({"type": "MultiPolygon", "coordinates": ps.iter().map(polygon_json).collect::<Vec<_>>()})
        }
    }
}

pub fn parse_geojson(text: &str) -> Result<FeatureCollection> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("GeoJSON: {e}")))?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::Parse("top-level object must be a FeatureCollection".into()));
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse("FeatureCollection without features array".into()))?;
    let features = features
        .iter()
        .enumerate()
        .map(|(i, f)| {
            if f.get("type").and_then(Value::as_str) != Some("Feature") {
                return Err(Error::Parse(format!("feature {i} is not of type Feature")));
            }
            let geometry = f
                .get("geometry")
                .ok_or_else(|| Error::Parse(format!("feature {i} has no geometry")))
                .and_then(parse_geometry)
                .map_err(|e| Error::Parse(format!("feature {i}: {e}")))?;
            let properties = match f.get("properties") {
                None | Some(Value::Null) => Map::new(),
                Some(Value::Object(m)) => m.clone(),
                Some(_) => return Err(Error::Parse(format!("feature {i} properties must be an object"))),
            };
            Ok(Feature { geometry, properties })
        })
        .collect::<Result<_>>()?;
    Ok(FeatureCollection { features })
}

pub fn to_geojson_string(fc: &FeatureCollection) -> String {
    let mut out = String::from("{\"type\":\"FeatureCollection\",\"features\":[");
    for (i, f) in fc.features.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push('\n');
        let v = json!({
            "type": "Feature",
            "properties": Value::Object(f.properties.clone()),
            "geometry": geometry_json(&f.geometry),
        });
        out.push_str(&v.to_string());
    }
    out.push_str("\n]}\n");
    out
}

pub fn read_geojson(path: &Path) -> Result<FeatureCollection> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_geojson(&text)
}

pub fn write_geojson(fc: &FeatureCollection, path: &Path) -> Result<()> {
    std::fs::write(path, to_geojson_string(fc)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn square_round_trips() {
        let fc = FeatureCollection::new(vec![Feature::new(Geometry::Polygon(Polygon::rect(77.1, 12.9, 77.2, 13.0)))
            .with_property("fid", 1)
            .with_property("State", "Karnataka")]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.geojson");
        write_geojson(&fc, &path).unwrap();
        assert_eq!(read_geojson(&path).unwrap(), fc);
    }

    #[test]
    fn empty_collection_is_valid() {
        let s = to_geojson_string(&FeatureCollection::default());
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["features"].as_array().unwrap().len(), 0);
        assert!(parse_geojson(&s).unwrap().is_empty());
    }

    #[test]
    fn multipolygon_keeps_parts() {
        let mp = Geometry::MultiPolygon(vec![Polygon::rect(0.0, 0.0, 1.0, 1.0), Polygon::rect(2.0, 2.0, 3.0, 3.0)]);
        let fc = FeatureCollection::new(vec![Feature::new(mp)]);
        let back = parse_geojson(&to_geojson_string(&fc)).unwrap();
        assert_eq!(back.features[0].geometry.polygons().len(), 2);
    }

    #[test]
    fn malformed_input_is_a_parse_error() {
        assert!(matches!(parse_geojson("{not json"), Err(Error::Parse(_))));
        let open_ring = r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{},
            "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1]]]}}]}"#;
        assert!(matches!(parse_geojson(open_ring), Err(Error::Parse(_))));
        let bad_type = r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{},
            "geometry":{"type":"Circle","coordinates":[0,0]}}]}"#;
        assert!(parse_geojson(bad_type).is_err());
    }

    proptest! {
        #[test]
        fn coordinates_round_trip_exactly(x in -180.0f64..180.0, y in -85.0f64..85.0, w in 1e-6f64..1.0, h in 1e-6f64..1.0) {
            let fc = FeatureCollection::new(vec![Feature::new(Geometry::Polygon(Polygon::rect(x, y, x + w, y + h)))]);
            let back = parse_geojson(&to_geojson_string(&fc)).unwrap();
            let (a, b) = (&fc.features[0].geometry.polygons()[0], &back.features[0].geometry.polygons()[0]);
            for (p, q) in a.exterior.iter().zip(&b.exterior) {
                prop_assert!((p[0] - q[0]).abs() <= 1e-9 && (p[1] - q[1]).abs() <= 1e-9);
            }
        }
    }
}
