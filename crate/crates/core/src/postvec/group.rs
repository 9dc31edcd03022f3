use crate::crs;
use crate::vector::{polygon_distance, BBox, Coord, Polygon};
use crate::{Error, Result};

use super::FarmPolygon;

pub const DEFAULT_GROUP_DISTANCE_M: f64 = 500.0;

/// Polygons belonging to one farm.
#[derive(Debug, Clone, PartialEq)]
pub struct FarmGroup {
    /// 1-based, in descending total area.
    pub fid: u32,
    pub members: Vec<FarmPolygon>,
    pub area_m2: f64,
    /// Area-weighted centroid as `[lon, lat]`.
    pub centroid: Coord,
    pub state: Option<String>,
    pub year_built: Option<i32>,
}

fn lonlat(crs_code: i32, c: Coord) -> Result<Coord> {
    let (lon, lat) = crs::to_lonlat(crs_code, c[0], c[1])?;
    Ok([lon, lat])
}

fn reproject(poly: &Polygon, from: i32, to: i32) -> Result<Polygon> {
    if from == to {
        return Ok(poly.clone());
    }
    poly.try_map_coords(|c| {
        let (lon, lat) = crs::to_lonlat(from, c[0], c[1])?;
        let (x, y) = crs::from_lonlat(to, lon, lat)?;
        Ok([x, y])
    })
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage grouping on boundary-to-boundary distance.
///
/// Polygons in one projected CRS are compared directly. Otherwise each
/// candidate pair is compared in the UTM zone of the first polygon's
/// centroid. fids follow descending total area; ties go to the more
/// western, then more southern centroid, so the result does not depend on
/// input order.
pub fn group_farms(polygons: &[FarmPolygon], threshold_m: f64) -> Result<Vec<FarmGroup>> {
    if !(threshold_m > 0.0 && threshold_m.is_finite()) {
        return Err(Error::Argument(format!("grouping distance must be positive, got {threshold_m}")));
    }
    let n = polygons.len();
    let centroids: Vec<Coord> = polygons.iter().map(|p| lonlat(p.crs, p.polygon.centroid())).collect::<Result<_>>()?;
    let shared = polygons.first().map(|p| p.crs).filter(|&c| c != 4326 && polygons.iter().all(|p| p.crs == c));

    let mut parent: Vec<usize> = (0..n).collect();
    if shared.is_some() {
        let boxes: Vec<BBox> = polygons.iter().map(|p| p.polygon.bbox()).collect();
        for i in 0..n {
            for j in i + 1..n {
                if boxes[i].distance(&boxes[j]) > threshold_m || find(&mut parent, i) == find(&mut parent, j) {
                    continue;
                }
                if polygon_distance(&polygons[i].polygon, &polygons[j].polygon) <= threshold_m {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    } else {
        let ll: Vec<Polygon> = polygons
            .iter()
            .map(|p| reproject(&p.polygon, p.crs, 4326))
            .collect::<Result<_>>()?;
        let boxes: Vec<BBox> = ll.iter().map(Polygon::bbox).collect();
        for i in 0..n {
            // Generous degree margin; the exact test below is in metres.
            let lat = centroids[i][1].abs().min(85.0).to_radians();
            let margin = 2.0 * threshold_m / (111_000.0 * lat.cos());
            for j in i + 1..n {
                if boxes[i].distance(&boxes[j]) > margin || find(&mut parent, i) == find(&mut parent, j) {
                    continue;
                }
                let zone = crs::utm_epsg_for(centroids[i][0], centroids[i][1]);
                let a = reproject(&ll[i], 4326, zone)?;
                let b = reproject(&ll[j], 4326, zone)?;
                if polygon_distance(&a, &b) <= threshold_m {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }

    let mut buckets: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let root = find(&mut parent, i);
        buckets.entry(root).or_default().push(i);
    }
    let mut groups: Vec<FarmGroup> = buckets
        .into_values()
        .map(|idx| {
            let mut members: Vec<(Coord, FarmPolygon)> = idx.iter().map(|&i| (centroids[i], polygons[i].clone())).collect();
            members.sort_by(|a, b| {
                a.0[0]
                    .total_cmp(&b.0[0])
                    .then(a.0[1].total_cmp(&b.0[1]))
                    .then(b.1.area_m2.total_cmp(&a.1.area_m2))
                    .then(a.1.id.cmp(&b.1.id))
            });
            let area: f64 = members.iter().map(|m| m.1.area_m2).sum();
            let mut c = [0.0, 0.0];
            for (mc, m) in &members {
                let w = m.area_m2 / area;
                c[0] += w * mc[0];
                c[1] += w * mc[1];
            }
            FarmGroup {
                fid: 0,
                members: members.into_iter().map(|m| m.1).collect(),
                area_m2: area,
                centroid: c,
                state: None,
                year_built: None,
            }
        })
        .collect();
    groups.sort_by(|a, b| {
        b.area_m2
            .total_cmp(&a.area_m2)
            .then(a.centroid[0].total_cmp(&b.centroid[0]))
            .then(a.centroid[1].total_cmp(&b.centroid[1]))
    });
    for (k, g) in groups.iter_mut().enumerate() {
        g.fid = k as u32 + 1;
    }
    Ok(groups)
}
