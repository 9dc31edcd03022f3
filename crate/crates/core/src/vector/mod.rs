//! Planar vector geometry and GeoJSON I/O.

mod geojson;
mod geometry;

use serde_json::{Map, Value};

use crate::raster::{GeoTransform, Grid};
use crate::{Error, Result};

pub use geojson::{parse_geojson, read_geojson, to_geojson_string, write_geojson};
pub use geometry::{
    intersection_area, point_segment_distance, polygon_distance, ring_is_simple, ring_signed_area,
    segment_distance,
};

pub type Coord = [f64; 2];

/// Axis-aligned bounding box `[min_x, min_y, max_x, max_y]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Coord,
    pub max: Coord,
}

impl BBox {
    pub fn empty() -> Self {
        BBox { min: [f64::INFINITY; 2], max: [f64::NEG_INFINITY; 2] }
    }

    pub fn extend(&mut self, c: Coord) {
        self.min = [self.min[0].min(c[0]), self.min[1].min(c[1])];
        self.max = [self.max[0].max(c[0]), self.max[1].max(c[1])];
    }

    pub fn union(mut self, other: &BBox) -> BBox {
        self.extend(other.min);
        self.extend(other.max);
        self
    }

    pub fn contains(&self, c: Coord) -> bool {
        c[0] >= self.min[0] && c[0] <= self.max[0] && c[1] >= self.min[1] && c[1] <= self.max[1]
    }

    /// Gap between two boxes (0 when they overlap).
    pub fn distance(&self, other: &BBox) -> f64 {
        let dx = (other.min[0] - self.max[0]).max(self.min[0] - other.max[0]).max(0.0);
        let dy = (other.min[1] - self.max[1]).max(self.min[1] - other.max[1]).max(0.0);
        dx.hypot(dy)
    }
}

/// Polygon with closed rings (first vertex repeated last).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub exterior: Vec<Coord>,
    pub interiors: Vec<Vec<Coord>>,
}

fn check_ring(ring: &[Coord]) -> Result<()> {
    if ring.len() < 4 {
        return Err(Error::Parse(format!("ring has {} positions, need at least 4", ring.len())));
    }
    if ring.first() != ring.last() {
        return Err(Error::Parse("ring is not closed".into()));
    }
    if ring.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Parse("ring has non-finite coordinates".into()));
    }
    Ok(())
}

impl Polygon {
    /// Validates ring closure and exterior simplicity.
    pub fn new(exterior: Vec<Coord>, interiors: Vec<Vec<Coord>>) -> Result<Self> {
        check_ring(&exterior)?;
        for r in &interiors {
            check_ring(r)?;
        }
        if !ring_is_simple(&exterior) {
            return Err(Error::Parse("exterior ring self-intersects".into()));
        }
        Ok(Polygon { exterior, interiors })
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let (x0, x1) = (x0.min(x1), x0.max(x1));
        let (y0, y1) = (y0.min(y1), y0.max(y1));
        Polygon { exterior: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]], interiors: vec![] }
    }

    pub fn rings(&self) -> impl Iterator<Item = &Vec<Coord>> {
        std::iter::once(&self.exterior).chain(&self.interiors)
    }

    pub fn area(&self) -> f64 {
        ring_signed_area(&self.exterior).abs() - self.interiors.iter().map(|r| ring_signed_area(r).abs()).sum::<f64>()
    }

    pub fn bbox(&self) -> BBox {
        let mut b = BBox::empty();
        for &c in &self.exterior {
            b.extend(c);
        }
        b
    }

    /// Area-weighted centroid, holes subtracted.
    pub fn centroid(&self) -> Coord {
        let (mut cx, mut cy, mut a) = (0.0, 0.0, 0.0);
        for (i, ring) in self.rings().enumerate() {
            let sign = if i == 0 { 1.0 } else { -1.0 };
            let (rx, ry, ra) = ring_moments(ring);
            // Orientation-normalised so holes always subtract.
            let s = sign * ra.signum();
            cx += s * rx;
            cy += s * ry;
            a += s * ra;
        }
        if a == 0.0 {
            return self.exterior[0];
        }
        [cx / a, cy / a]
    }

    pub fn contains_point(&self, p: Coord) -> bool {
        point_in_ring(&self.exterior, p) && !self.interiors.iter().any(|r| point_in_ring(r, p))
    }

    pub fn map_coords(&self, mut f: impl FnMut(Coord) -> Coord) -> Polygon {
        Polygon {
            exterior: self.exterior.iter().map(|&c| f(c)).collect(),
            interiors: self.interiors.iter().map(|r| r.iter().map(|&c| f(c)).collect()).collect(),
        }
    }

    pub fn try_map_coords(&self, mut f: impl FnMut(Coord) -> Result<Coord>) -> Result<Polygon> {
        Ok(Polygon {
            exterior: self.exterior.iter().map(|&c| f(c)).collect::<Result<_>>()?,
            interiors: self
                .interiors
                .iter()
                .map(|r| r.iter().map(|&c| f(c)).collect::<Result<_>>())
                .collect::<Result<_>>()?,
        })
    }

    /// Exterior counter-clockwise, holes clockwise.
    pub fn oriented(mut self) -> Polygon {
        if ring_signed_area(&self.exterior) < 0.0 {
            self.exterior.reverse();
        }
        for r in &mut self.interiors {
            if ring_signed_area(r) > 0.0 {
                r.reverse();
            }
        }
        self
    }
}

/// `(Σ cx·2A_i, Σ cy·2A_i, A)` terms of the shoelace centroid.
fn ring_moments(ring: &[Coord]) -> (f64, f64, f64) {
    let o = ring[0];
    let (mut cx, mut cy, mut a2) = (0.0, 0.0, 0.0);
    for w in ring.windows(2) {
        let (x0, y0) = (w[0][0] - o[0], w[0][1] - o[1]);
        let (x1, y1) = (w[1][0] - o[0], w[1][1] - o[1]);
        let cr = x0 * y1 - x1 * y0;
        a2 += cr;
        cx += (x0 + x1) * cr;
        cy += (y0 + y1) * cr;
    }
    let a = a2 / 2.0;
    if a == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    // Shift back from the local origin: Σ = centroid × area.
    (cx / 6.0 + o[0] * a, cy / 6.0 + o[1] * a, a)
}

/// Even-odd crossing test.
pub fn point_in_ring(ring: &[Coord], p: Coord) -> bool {
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Point(Coord),
    LineString(Vec<Coord>),
    MultiLineString(Vec<Vec<Coord>>),
    Polygon(Polygon),
    MultiPolygon(Vec<Polygon>),
}

impl Geometry {
    pub fn polygons(&self) -> &[Polygon] {
        match self {
            Geometry::Polygon(p) => std::slice::from_ref(p),
            Geometry::MultiPolygon(ps) => ps,
            _ => &[],
        }
    }

    /// Line parts of linear geometries; polygon rings count as lines too.
    pub fn lines(&self) -> Vec<&[Coord]> {
        match self {
            Geometry::Point(_) => vec![],
            Geometry::LineString(l) => vec![l.as_slice()],
            Geometry::MultiLineString(ls) => ls.iter().map(|l| l.as_slice()).collect(),
            Geometry::Polygon(p) => p.rings().map(|r| r.as_slice()).collect(),
            Geometry::MultiPolygon(ps) => ps.iter().flat_map(|p| p.rings().map(|r| r.as_slice())).collect(),
        }
    }

    pub fn try_map_coords(&self, mut f: impl FnMut(Coord) -> Result<Coord>) -> Result<Geometry> {
        Ok(match self {
            Geometry::Point(c) => Geometry::Point(f(*c)?),
            Geometry::LineString(l) => Geometry::LineString(l.iter().map(|&c| f(c)).collect::<Result<_>>()?),
            Geometry::MultiLineString(ls) => Geometry::MultiLineString(
                ls.iter().map(|l| l.iter().map(|&c| f(c)).collect::<Result<_>>()).collect::<Result<_>>()?,
            ),
            Geometry::Polygon(p) => Geometry::Polygon(p.try_map_coords(&mut f)?),
            Geometry::MultiPolygon(ps) => {
                Geometry::MultiPolygon(ps.iter().map(|p| p.try_map_coords(&mut f)).collect::<Result<_>>()?)
            }
        })
    }

    pub fn contains_point(&self, p: Coord) -> bool {
        self.polygons().iter().any(|poly| poly.contains_point(p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    pub geometry: Geometry,
    pub properties: Map<String, Value>,
}

impl Feature {
    pub fn new(geometry: Geometry) -> Self {
        Feature { geometry, properties: Map::new() }
    }

    pub fn with_property(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.properties.insert(key.to_string(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureCollection {
    pub features: Vec<Feature>,
}

impl FeatureCollection {
    pub fn new(features: Vec<Feature>) -> Self {
        FeatureCollection { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Marks every cell whose centre lies inside any of the polygons.
///
/// Polygon coordinates must be in the grid's CRS.
pub fn rasterize(polygons: &[Polygon], transform: &GeoTransform, width: usize, height: usize) -> Grid<u8> {
    let mut grid = Grid::filled(width, height, 0u8);
    for poly in polygons {
        let b = poly.bbox();
        let (c0, r0) = transform.world_to_pixel(b.min[0], b.min[1]);
        let (c1, r1) = transform.world_to_pixel(b.max[0], b.max[1]);
        let clamp = |v: f64, n: usize| (v.max(0.0) as usize).min(n);
        let (cmin, cmax) = (clamp(c0.min(c1).floor(), width), clamp(c0.max(c1).ceil(), width));
        let (rmin, rmax) = (clamp(r0.min(r1).floor(), height), clamp(r0.max(r1).ceil(), height));
        for row in rmin..rmax {
            for col in cmin..cmax {
                if poly.contains_point(transform.pixel_center(col, row).into()) {
                    grid.set(row, col, 1);
                }
            }
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_area_centroid_and_containment() {
        let r = Polygon::rect(0.0, 0.0, 4.0, 2.0);
        assert_eq!(r.area(), 8.0);
        assert_eq!(r.centroid(), [2.0, 1.0]);
        assert!(r.contains_point([1.0, 1.0]));
        assert!(!r.contains_point([5.0, 1.0]));
    }

    #[test]
    fn hole_reduces_area_and_moves_centroid() {
        let mut p = Polygon::rect(0.0, 0.0, 4.0, 4.0);
        p.interiors.push(Polygon::rect(0.0, 0.0, 2.0, 2.0).exterior);
        assert_eq!(p.area(), 12.0);
        let c = p.centroid();
        assert!((c[0] - (16.0 * 2.0 - 4.0 * 1.0) / 12.0).abs() < 1e-12);
        assert!(!p.contains_point([1.0, 1.0]));
    }

    #[test]
    fn new_rejects_open_and_self_intersecting_rings() {
        assert!(Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![]).is_err());
        let bowtie = vec![[0.0, 0.0], [2.0, 2.0], [2.0, 0.0], [0.0, 2.0], [0.0, 0.0]];
        assert!(Polygon::new(bowtie, vec![]).is_err());
    }

    #[test]
    fn rasterize_rectangle_cells() {
        let t = GeoTransform::north_up(0.0, 100.0, 10.0, 32643);
        let g = rasterize(&[Polygon::rect(10.0, 70.0, 40.0, 90.0)], &t, 10, 10);
        let on: Vec<(usize, usize)> =
            (0..10).flat_map(|r| (0..10).map(move |c| (r, c))).filter(|&(r, c)| g.get(r, c) == 1).collect();
        assert_eq!(on.len(), 6);
        assert!(on.iter().all(|&(r, c)| (1..3).contains(&r) && (1..4).contains(&c)));
    }
}
