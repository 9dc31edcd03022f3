use super::{Coord, Polygon};

/// Shoelace area; positive for counter-clockwise rings.
pub fn ring_signed_area(ring: &[Coord]) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    let o = ring[0];
    let mut s = 0.0;
    for w in ring.windows(2) {
        s += (w[0][0] - o[0]) * (w[1][1] - o[1]) - (w[1][0] - o[0]) * (w[0][1] - o[1]);
    }
    s / 2.0
}

#[inline]
fn sub(a: Coord, b: Coord) -> Coord {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn cross(a: Coord, b: Coord) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
fn dot(a: Coord, b: Coord) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn orient(a: Coord, b: Coord, c: Coord) -> f64 {
    cross(sub(b, a), sub(c, a))
}

pub fn point_segment_distance(p: Coord, a: Coord, b: Coord) -> f64 {
    let ab = sub(b, a);
    let len2 = dot(ab, ab);
    let t = if len2 == 0.0 { 0.0 } else { (dot(sub(p, a), ab) / len2).clamp(0.0, 1.0) };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    (p[0] - q[0]).hypot(p[1] - q[1])
}

fn on_segment(a: Coord, b: Coord, p: Coord) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a: Coord, b: Coord, c: Coord, d: Coord) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// Minimum distance between segments `ab` and `cd`; 0 if they touch.
pub fn segment_distance(a: Coord, b: Coord, c: Coord, d: Coord) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// True unless two edges cross or overlap along a positive length.
///
/// Rings may touch themselves at isolated vertices (as pixel-boundary rings
/// do at diagonal pinch points).
pub fn ring_is_simple(ring: &[Coord]) -> bool {
    let n = ring.len().saturating_sub(1);
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (ring[i], ring[i + 1]);
        for j in i + 1..n {
            let (c, d) = (ring[j], ring[j + 1]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            let (o1, o2) = (orient(a, b, c), orient(a, b, d));
            let (o3, o4) = (orient(c, d, a), orient(c, d, b));
            if o1 == 0.0 && o2 == 0.0 {
                // Collinear: reject overlap of positive length.
                let ab = sub(b, a);
                let len2 = dot(ab, ab);
                if len2 == 0.0 {
                    continue;
                }
                let t0 = dot(sub(c, a), ab) / len2;
                let t1 = dot(sub(d, a), ab) / len2;
                let (lo, hi) = (t0.min(t1).max(0.0), t0.max(t1).min(1.0));
                if hi - lo > 1e-12 {
                    return false;
                }
                continue;
            }
            if adjacent {
                continue;
            }
            let proper = o1 * o2 < 0.0 && o3 * o4 < 0.0;
            // A vertex of one edge lying in the interior of the other.
            let t_junction = (o1 == 0.0 && strictly_inside(a, b, c))
                || (o2 == 0.0 && strictly_inside(a, b, d))
                || (o3 == 0.0 && strictly_inside(c, d, a))
                || (o4 == 0.0 && strictly_inside(c, d, b));
            if proper || t_junction {
                return false;
            }
        }
    }
    true
}

fn strictly_inside(a: Coord, b: Coord, p: Coord) -> bool {
    on_segment(a, b, p) && p != a && p != b
}

fn edges(poly: &Polygon) -> impl Iterator<Item = (Coord, Coord)> + '_ {
    poly.rings().flat_map(|r| r.windows(2).map(|w| (w[0], w[1])))
}

/// Minimum boundary-to-boundary distance; 0 if the polygons overlap or one
/// contains the other.
pub fn polygon_distance(p: &Polygon, q: &Polygon) -> f64 {
    if p.contains_point(q.exterior[0]) || q.contains_point(p.exterior[0]) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for (a, b) in edges(p) {
        for (c, d) in edges(q) {
            best = best.min(segment_distance(a, b, c, d));
            if best == 0.0 {
                return 0.0;
            }
        }
    }
    best
}

/// Exact area of `a ∩ b` for simple polygons (holes allowed).
///
/// Green's theorem: the intersection's boundary consists of the parts of
/// `∂a` inside `b` plus the parts of `∂b` inside `a`; coincident boundary
/// pieces are counted once when both polygons lie on the same side.
pub fn intersection_area(a: &Polygon, b: &Polygon) -> f64 {
    let ba = a.bbox();
    let bb = b.bbox();
    if ba.distance(&bb) > 0.0 {
        return 0.0;
    }
    let origin = ba.union(&bb).min;
    let scale = {
        let u = ba.union(&bb);
        (u.max[0] - u.min[0]).hypot(u.max[1] - u.min[1]).max(1e-300)
    };
    let local = |p: &Polygon| p.map_coords(|c| [c[0] - origin[0], c[1] - origin[1]]).oriented();
    let (a, b) = (local(a), local(b));
    let eps = 1e-9 * scale;
    (boundary_integral(&a, &b, eps, true) + boundary_integral(&b, &a, eps, false)).max(0.0)
}

/// ∮ over the pieces of `∂src` inside `clip` of (x dy − y dx)/2.
fn boundary_integral(src: &Polygon, clip: &Polygon, eps: f64, keep_shared: bool) -> f64 {
    let clip_edges: Vec<(Coord, Coord)> = edges(clip).collect();
    let mut total = 0.0;
    for (p, q) in edges(src) {
        let d = sub(q, p);
        let len2 = dot(d, d);
        if len2 == 0.0 {
            continue;
        }
        let mut ts = vec![0.0, 1.0];
        for &(c, e) in &clip_edges {
            ts.extend(split_params(p, q, c, e, eps));
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
        for w in ts.windows(2) {
            if w[1] - w[0] < 1e-12 {
                continue;
            }
            let s = [p[0] + w[0] * d[0], p[1] + w[0] * d[1]];
            let t = [p[0] + w[1] * d[0], p[1] + w[1] * d[1]];
            let mid = [(s[0] + t[0]) / 2.0, (s[1] + t[1]) / 2.0];
            let include = match shared_direction(mid, d, &clip_edges, eps) {
                Some(same) => keep_shared && same,
                None => clip.contains_point(mid),
            };
            if include {
                total += cross(s, t) / 2.0;
            }
        }
    }
    total
}

/// Parameters along `pq` where it meets segment `ce`.
fn split_params(p: Coord, q: Coord, c: Coord, e: Coord, eps: f64) -> Vec<f64> {
    let r = sub(q, p);
    let s = sub(e, c);
    let denom = cross(r, s);
    let len2 = dot(r, r);
    let mut out = Vec::new();
    if denom.abs() > 1e-15 * len2.sqrt() * dot(s, s).sqrt() {
        let t = cross(sub(c, p), s) / denom;
        let u = cross(sub(c, p), r) / denom;
        if (-1e-12..=1.0 + 1e-12).contains(&t) && (-1e-12..=1.0 + 1e-12).contains(&u) {
            out.push(t.clamp(0.0, 1.0));
        }
    } else if point_segment_distance(c, p, q) <= eps || point_segment_distance(e, p, q) <= eps {
        for v in [c, e] {
            let t = dot(sub(v, p), r) / len2;
            if (0.0..=1.0).contains(&t) {
                out.push(t);
            }
        }
    }
    out
}

/// For a point on some clip edge: whether that edge runs the same way as `dir`.
fn shared_direction(mid: Coord, dir: Coord, clip_edges: &[(Coord, Coord)], eps: f64) -> Option<bool> {
    clip_edges.iter().find_map(|&(c, e)| {
        let s = sub(e, c);
        let parallel = cross(dir, s).abs() <= 1e-12 * dot(dir, dir).sqrt() * dot(s, s).sqrt();
        (parallel && point_segment_distance(mid, c, e) <= eps).then(|| dot(dir, s) > 0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect_overlap(a: [f64; 4], b: [f64; 4]) -> f64 {
        let w = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
        let h = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
        w * h
    }

    #[test]
    fn identical_and_adjacent_rectangles() {
        let a = Polygon::rect(0.0, 0.0, 10.0, 10.0);
        assert!((intersection_area(&a, &a) - 100.0).abs() < 1e-9);
        let b = Polygon::rect(10.0, 0.0, 20.0, 10.0);
        assert!(intersection_area(&a, &b).abs() < 1e-9);
        let c = Polygon::rect(5.0, 0.0, 15.0, 10.0);
        assert!((intersection_area(&a, &c) - 50.0).abs() < 1e-9);
    }

    #[test]
    fn hole_is_excluded_from_overlap() {
        let mut ring = Polygon::rect(0.0, 0.0, 30.0, 30.0);
        ring.interiors.push(Polygon::rect(10.0, 10.0, 20.0, 20.0).exterior);
        let probe = Polygon::rect(5.0, 5.0, 25.0, 25.0);
        assert!((intersection_area(&ring, &probe) - (400.0 - 100.0)).abs() < 1e-9);
    }

    #[test]
    fn projected_coordinates_stay_exact() {
        let a = Polygon::rect(712_000.0, 1_400_000.0, 712_300.0, 1_400_100.0);
        let b = Polygon::rect(712_150.0, 1_399_950.0, 712_450.0, 1_400_050.0);
        assert!((intersection_area(&a, &b) - 150.0 * 50.0).abs() < 1e-6);
    }

    #[test]
    fn distances() {
        let a = Polygon::rect(0.0, 0.0, 10.0, 10.0);
        let b = Polygon::rect(110.0, 0.0, 120.0, 10.0);
        assert!((polygon_distance(&a, &b) - 100.0).abs() < 1e-12);
        let inner = Polygon::rect(2.0, 2.0, 3.0, 3.0);
        assert_eq!(polygon_distance(&a, &inner), 0.0);
        assert!((point_segment_distance([0.0, 15.0], [0.0, 0.0], [10.0, 0.0]) - 15.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn rectangle_overlap_matches_closed_form(
            x0 in 0i32..40, y0 in 0i32..40, w0 in 1i32..30, h0 in 1i32..30,
            x1 in 0i32..40, y1 in 0i32..40, w1 in 1i32..30, h1 in 1i32..30,
        ) {
            let ra = [x0 as f64, y0 as f64, (x0 + w0) as f64, (y0 + h0) as f64];
            let rb = [x1 as f64, y1 as f64, (x1 + w1) as f64, (y1 + h1) as f64];
            let a = Polygon::rect(ra[0], ra[1], ra[2], ra[3]);
            let b = Polygon::rect(rb[0], rb[1], rb[2], rb[3]);
            let expected = rect_overlap(ra, rb);
            prop_assert!((intersection_area(&a, &b) - expected).abs() < 1e-7);
            prop_assert!((intersection_area(&b, &a) - expected).abs() < 1e-7);
        }
    }
}
