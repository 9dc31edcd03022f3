use std::collections::HashMap;

use crate::raster::{GeoTransform, Grid, LabelMask};
use crate::vector::{Coord, Polygon};
use crate::Result;

/// One 4-connected component of a predicted mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FarmPolygon {
    pub id: String,
    /// In the CRS given by `crs`.
    pub polygon: Polygon,
    pub crs: i32,
    pub pixel_count: usize,
    pub area_m2: f64,
}

/// Component labels (1-based, 0 = background) in raster-scan order of
/// first pixel.
fn label_components(mask: &LabelMask) -> (Grid<u32>, Vec<usize>) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = Grid::filled(w, h, 0u32);
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for r0 in 0..h {
        for c0 in 0..w {
            if !mask.get(r0, c0) || labels.get(r0, c0) != 0 {
                continue;
            }
            let id = sizes.len() as u32 + 1;
            let mut n = 0;
            labels.set(r0, c0, id);
            stack.push((r0, c0));
            while let Some((r, c)) = stack.pop() {
                n += 1;
                let mut visit = |rr: usize, cc: usize| {
                    if mask.get(rr, cc) && labels.get(rr, cc) == 0 {
                        labels.set(rr, cc, id);
                        stack.push((rr, cc));
                    }
                };
                if r > 0 {
                    visit(r - 1, c);
                }
                if r + 1 < h {
                    visit(r + 1, c);
                }
                if c > 0 {
                    visit(r, c - 1);
                }
                if c + 1 < w {
                    visit(r, c + 1);
                }
            }
            sizes.push(n);
        }
    }
    (labels, sizes)
}

type V = (i64, i64);

/// Directed boundary edges of one component, in pixel-corner coordinates
/// `(col, row)`, clockwise on screen so the component is on the right.
fn boundary_edges(labels: &Grid<u32>, id: u32, pixels: &[(usize, usize)]) -> Vec<(V, V)> {
    let (w, h) = (labels.width(), labels.height());
    let inside = |r: i64, c: i64| r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w && labels.get(r as usize, c as usize) == id;
    let mut edges = Vec::new();
    for &(r, c) in pixels {
        let (r, c) = (r as i64, c as i64);
        if !inside(r - 1, c) {
            edges.push(((c, r), (c + 1, r)));
        }
        if !inside(r, c + 1) {
            edges.push(((c + 1, r), (c + 1, r + 1)));
        }
        if !inside(r + 1, c) {
            edges.push(((c + 1, r + 1), (c, r + 1)));
        }
        if !inside(r, c - 1) {
            edges.push(((c, r + 1), (c, r)));
        }
    }
    edges
}

/// Chains edges into closed rings. Where two rings meet at a vertex the
/// trace turns left, so every 4-connected background region enclosed by the
/// component gets its own ring and no ring touches itself.
fn trace_rings(edges: &[(V, V)]) -> Vec<Vec<V>> {
    let mut out_of: HashMap<V, Vec<usize>> = HashMap::new();
    for (i, e) in edges.iter().enumerate() {
        out_of.entry(e.0).or_default().push(i);
    }
    let mut used = vec![false; edges.len()];
    let mut rings = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut ring = vec![edges[start].0];
        let mut cur = start;
        loop {
            let (a, b) = edges[cur];
            let d = (b.0 - a.0, b.1 - a.1);
            let rank = |e: usize| {
                let (p, q) = edges[e];
                let nd = (q.0 - p.0, q.1 - p.1);
                if nd == (d.1, -d.0) {
                    0
                } else if nd == d {
                    1
                } else {
                    2
                }
            };
            let next = out_of[&b]
                .iter()
                .copied()
                .filter(|&e| !used[e] || e == start)
                .min_by_key(|&e| rank(e))
                .expect("boundary edges form closed loops");
            if next == start {
                break;
            }
            used[next] = true;
            ring.push(b);
            cur = next;
        }
        ring.push(ring[0]);
        rings.push(ring);
    }
    rings
}

/// Drops vertices in the middle of straight runs. Keeps the ring closed.
fn simplify(ring: &[V]) -> Vec<V> {
    let n = ring.len() - 1;
    let mut out: Vec<V> = Vec::with_capacity(n + 1);
    for i in 0..n {
        let prev = ring[(i + n - 1) % n];
        let (p, next) = (ring[i], ring[(i + 1) % n]);
        let cross = (p.0 - prev.0) * (next.1 - p.1) - (p.1 - prev.1) * (next.0 - p.0);
        if cross != 0 {
            out.push(p);
        }
    }
    out.push(out[0]);
    out
}

fn to_world(ring: &[V], t: &GeoTransform) -> Vec<Coord> {
    ring.iter().map(|&(c, r)| t.pixel_to_world(c as f64, r as f64).into()).collect()
}

/// Traces every 4-connected component of `mask` into a polygon with holes.
///
/// Coordinates come from the mask's transform. Ids are the component index
/// in raster-scan order of each component's first pixel.
pub fn polygonize(mask: &LabelMask) -> Result<Vec<FarmPolygon>> {
    let (labels, sizes) = label_components(mask);
    let t = *mask.transform();
    let mut pixels: Vec<Vec<(usize, usize)>> = vec![Vec::new(); sizes.len()];
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            let id = labels.get(r, c);
            if id > 0 {
                pixels[id as usize - 1].push((r, c));
            }
        }
    }
    let mut out = Vec::with_capacity(sizes.len());
    for (i, px) in pixels.iter().enumerate() {
        let edges = boundary_edges(&labels, i as u32 + 1, px);
        let rings = trace_rings(&edges);
        // The top edge of the first pixel always lies on the outer boundary.
        let (r0, c0) = (px[0].0 as i64, px[0].1 as i64);
        let top = (c0, r0);
        let outer_idx = rings
            .iter()
            .position(|ring| ring.windows(2).any(|w| w[0] == top && w[1] == (c0 + 1, r0)))
            .expect("first pixel top edge is traced");
        let mut exterior = None;
        let mut interiors = Vec::new();
        for (k, ring) in rings.iter().enumerate() {
            let world = to_world(&simplify(ring), &t);
            if k == outer_idx {
                exterior = Some(world);
            } else {
                interiors.push(world);
            }
        }
        let polygon = Polygon::new(exterior.unwrap(), interiors)?.oriented();
        out.push(FarmPolygon {
            id: i.to_string(),
            polygon,
            crs: t.crs_code,
            pixel_count: sizes[i],
            area_m2: sizes[i] as f64 * t.pixel_area(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::rasterize;
    use proptest::prelude::*;

    fn t() -> GeoTransform {
        GeoTransform::north_up(500_000.0, 1_500_000.0, 10.0, 32643)
    }

    fn mask_from(rows: &[&str]) -> LabelMask {
        let h = rows.len();
        let w = rows[0].len();
        let g = Grid::from_fn(w, h, |r, c| (rows[r].as_bytes()[c] == b'#') as u8);
        LabelMask::new(g, t()).unwrap()
    }

    /// Holes of one component: background cells, 4-connected, that a flood
    /// fill from outside the grid cannot reach without crossing the component.
    fn flood_fill_holes(mask: &LabelMask) -> usize {
        let (w, h) = (mask.width() + 2, mask.height() + 2);
        let fg = |r: usize, c: usize| r >= 1 && c >= 1 && r <= mask.height() && c <= mask.width() && mask.get(r - 1, c - 1);
        let mut seen = vec![false; w * h];
        let fill = |sr: usize, sc: usize, seen: &mut Vec<bool>| {
            let mut st = vec![(sr, sc)];
            seen[sr * w + sc] = true;
            while let Some((r, c)) = st.pop() {
                let nb = [(r.wrapping_sub(1), c), (r + 1, c), (r, c.wrapping_sub(1)), (r, c + 1)];
                for (rr, cc) in nb {
                    if rr < h && cc < w && !fg(rr, cc) && !seen[rr * w + cc] {
                        seen[rr * w + cc] = true;
                        st.push((rr, cc));
                    }
                }
            }
        };
        fill(0, 0, &mut seen);
        let mut holes = 0;
        for r in 0..h {
            for c in 0..w {
                if !fg(r, c) && !seen[r * w + c] {
                    holes += 1;
                    fill(r, c, &mut seen);
                }
            }
        }
        holes
    }

    #[test]
    fn solid_block() {
        let polys = polygonize(&mask_from(&["....", ".###", ".###", ".###"])).unwrap();
        assert_eq!(polys.len(), 1);
        assert_eq!(polys[0].pixel_count, 9);
        assert_eq!(polys[0].area_m2, 900.0);
        assert!((polys[0].polygon.area() - 900.0).abs() < 1e-6);
        assert_eq!(polys[0].polygon.exterior.len(), 5);
    }

    #[test]
    fn diagonal_pixels_are_separate() {
        let polys = polygonize(&mask_from(&["#.", ".#"])).unwrap();
        assert_eq!(polys.len(), 2);
        assert!(polys.iter().all(|p| p.pixel_count == 1));
    }

    #[test]
    fn ring_has_one_hole() {
        let m = mask_from(&["#####", "#...#", "#.#.#", "#...#", "#####"]);
        let polys = polygonize(&m).unwrap();
        assert_eq!(polys.len(), 2);
        let ring = polys.iter().find(|p| p.pixel_count == 16).unwrap();
        assert_eq!(ring.polygon.interiors.len(), 1);
        let ring_only = mask_from(&["#####", "#...#", "#...#", "#...#", "#####"]);
        assert_eq!(flood_fill_holes(&ring_only), 1);
        assert!((ring.polygon.area() - 1600.0).abs() < 1e-6);
    }

    #[test]
    fn pinched_hole_touches_outer_ring() {
        // The enclosed cell is cut off from the outside only diagonally.
        let m = mask_from(&["###.", "#.#.", "##.#", "...."]);
        let polys = polygonize(&m).unwrap();
        let big = polys.iter().max_by_key(|p| p.pixel_count).unwrap();
        let single = mask_from(&["###.", "#.#.", "##..", "...."]);
        assert_eq!(big.polygon.interiors.len(), flood_fill_holes(&single));
        assert!((big.polygon.area() - big.area_m2).abs() < 1e-6);
    }

    #[test]
    fn empty_mask_gives_nothing() {
        assert!(polygonize(&LabelMask::zeros(5, 5, t())).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn area_matches_pixel_count(bits in proptest::collection::vec(any::<bool>(), 64)) {
            let g = Grid::from_vec(8, 8, bits.iter().map(|&b| b as u8).collect()).unwrap();
            let m = LabelMask::new(g, t()).unwrap();
            let polys = polygonize(&m).unwrap();
            prop_assert_eq!(polys.iter().map(|p| p.pixel_count).sum::<usize>(), m.count_positive());
            for p in &polys {
                prop_assert!((p.polygon.area() - p.area_m2).abs() < 1e-6);
            }
            let back = rasterize(&polys.iter().map(|p| p.polygon.clone()).collect::<Vec<_>>(), &t(), 8, 8);
            prop_assert_eq!(&back, m.grid());
        }

        #[test]
        fn rasterize_then_polygonize_is_identity(c0 in 0usize..10, r0 in 0usize..10, w in 1usize..8, h in 1usize..8) {
            let tr = t();
            let (x0, y1) = tr.pixel_to_world(c0 as f64, r0 as f64);
            let (x1, y0) = tr.pixel_to_world((c0 + w) as f64, (r0 + h) as f64);
            let rect = Polygon::rect(x0, y0, x1, y1);
            let g = rasterize(std::slice::from_ref(&rect), &tr, 20, 20);
            let polys = polygonize(&LabelMask::new(g.clone(), tr).unwrap()).unwrap();
            prop_assert_eq!(polys.len(), 1);
            prop_assert!((polys[0].polygon.area() - rect.area()).abs() < 1e-6);
            prop_assert_eq!(rasterize(&[polys[0].polygon.clone()], &tr, 20, 20), g);
        }
    }
}
