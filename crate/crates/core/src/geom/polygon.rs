use serde::{Deserialize, Serialize};

use super::{Point2, Segment2};
use crate::Scalar;

/// Shoelace area of an open ring (last vertex is not repeated). Positive for
/// counter-clockwise rings.
pub fn signed_area<T: Scalar>(ring: &[Point2<T>]) -> T {
    if ring.len() < 3 {
        return T::zero();
    }
    // Shifted to the first vertex to limit cancellation on large coordinates.
    let o = ring[0];
    let mut acc = T::zero();
    for i in 1..ring.len() - 1 {
        acc = acc + (ring[i] - o).cross(ring[i + 1] - o);
    }
    acc * T::lit(0.5)
}

pub fn point_segment_distance<T: Scalar>(p: Point2<T>, a: Point2<T>, b: Point2<T>) -> T {
    let ab = b - a;
    let len2 = ab.norm2();
    if len2 == T::zero() {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).max(T::zero()).min(T::one());
    p.dist(a + ab * t)
}

/// Even-odd containment test. Points exactly on the boundary may land on
/// either side; callers that care use a distance tolerance.
pub fn ring_contains<T: Scalar>(ring: &[Point2<T>], p: Point2<T>) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn ring_boundary_distance<T: Scalar>(ring: &[Point2<T>], p: Point2<T>) -> T {
    let n = ring.len();
    (0..n)
        .map(|i| point_segment_distance(p, ring[i], ring[(i + 1) % n]))
        .fold(T::infinity(), T::min)
}

fn segments_touch<T: Scalar>(a: Point2<T>, b: Point2<T>, c: Point2<T>, d: Point2<T>) -> bool {
    let o1 = (b - a).cross(c - a);
    let o2 = (b - a).cross(d - a);
    let o3 = (d - c).cross(a - c);
    let o4 = (d - c).cross(b - c);
    let z = T::zero();
    if ((o1 > z && o2 < z) || (o1 < z && o2 > z)) && ((o3 > z && o4 < z) || (o3 < z && o4 > z)) {
        return true;
    }
    let on = |p: Point2<T>, q: Point2<T>, r: Point2<T>, o: T| {
        o == z && r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

/// True when the open ring has at least three vertices, non-zero area and no
/// two non-adjacent edges touch.
pub fn ring_is_simple<T: Scalar>(ring: &[Point2<T>]) -> bool {
    let n = ring.len();
    if n < 3 || signed_area(ring) == T::zero() {
        return false;
    }
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in i + 1..n {
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Adjacent edges share one vertex; they must not fold back.
                let shared = if j == i + 1 { b } else { a };
                let other_a = if j == i + 1 { a } else { b };
                let other_c = if j == i + 1 { d } else { c };
                let u = other_a - shared;
                let v = other_c - shared;
                if u.cross(v) == T::zero() && u.dot(v) > T::zero() {
                    return false;
                }
                continue;
            }
            if segments_touch(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// A point strictly inside the region bounded by `rings` (even-odd rule),
/// found on the horizontal scanline through the widest vertex-free band.
pub fn interior_point<T: Scalar>(rings: &[Vec<Point2<T>>]) -> Option<Point2<T>> {
    let mut ys: Vec<T> = rings.iter().flatten().map(|p| p.y).collect();
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.dedup();
    let mut gaps: Vec<(T, T)> = ys.windows(2).map(|w| (w[1] - w[0], (w[0] + w[1]) * T::lit(0.5))).collect();
    gaps.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut best: Option<(T, Point2<T>)> = None;
    for &(h, y) in gaps.iter().take(8) {
        let mut xs = Vec::new();
        for ring in rings {
            let n = ring.len();
            for i in 0..n {
                let (a, b) = (ring[i], ring[(i + 1) % n]);
                if (a.y > y) != (b.y > y) {
                    xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
                }
            }
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for pair in xs.chunks_exact(2) {
            // A wide chord in a razor-thin band is no better than a thin one.
            let w = (pair[1] - pair[0]).min(h);
            if best.map_or(true, |(bw, _)| w > bw) {
                best = Some((w, Point2::new((pair[0] + pair[1]) * T::lit(0.5), y)));
            }
        }
    }
    best.map(|(_, p)| p)
}

/// Polygon with holes. Rings are stored open; the outer ring is
/// counter-clockwise and holes are clockwise once normalized.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polygon2<T> {
    pub outer: Vec<Point2<T>>,
    pub holes: Vec<Vec<Point2<T>>>,
}

impl<T: Scalar> Polygon2<T> {
    pub fn new(outer: Vec<Point2<T>>, holes: Vec<Vec<Point2<T>>>) -> Self {
        let mut p = Self { outer, holes };
        p.normalize_orientation();
        p
    }

    pub fn normalize_orientation(&mut self) {
        if signed_area(&self.outer) < T::zero() {
            self.outer.reverse();
        }
        for h in &mut self.holes {
            if signed_area(h) > T::zero() {
                h.reverse();
            }
        }
    }

    pub fn area(&self) -> T {
        self.holes
            .iter()
            .fold(signed_area(&self.outer).abs(), |acc, h| acc - signed_area(h).abs())
    }

    pub fn rings(&self) -> impl Iterator<Item = &Vec<Point2<T>>> {
        std::iter::once(&self.outer).chain(self.holes.iter())
    }

    /// All boundary edges of all rings.
    pub fn edges(&self) -> impl Iterator<Item = Segment2<T>> + '_ {
        self.rings().flat_map(|r| {
            let n = r.len();
            (0..n).map(move |i| Segment2::new(r[i], r[(i + 1) % n]))
        })
    }

    pub fn contains(&self, p: Point2<T>) -> bool {
        ring_contains(&self.outer, p) && !self.holes.iter().any(|h| ring_contains(h, p))
    }

    pub fn boundary_distance(&self, p: Point2<T>) -> T {
        self.rings()
            .map(|r| ring_boundary_distance(r, p))
            .fold(T::infinity(), T::min)
    }

    /// Closed containment: interior points and points within `tol` of the
    /// boundary.
    pub fn contains_with_tol(&self, p: Point2<T>, tol: T) -> bool {
        self.contains(p) || self.boundary_distance(p) <= tol
    }

    pub fn bbox(&self) -> (Point2<T>, Point2<T>) {
        let mut lo = Point2::new(T::infinity(), T::infinity());
        let mut hi = Point2::new(T::neg_infinity(), T::neg_infinity());
        for p in &self.outer {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }

    pub fn map(&self, f: impl Fn(Point2<T>) -> Point2<T>) -> Self {
        let mut p = Self {
            outer: self.outer.iter().map(|&q| f(q)).collect(),
            holes: self.holes.iter().map(|h| h.iter().map(|&q| f(q)).collect()).collect(),
        };
        p.normalize_orientation();
        p
    }
}

/// Parameter intervals `[t0, t1] ⊂ [0, 1]` of the segment `a→b` that lie inside
/// the closed polygon. Touching the boundary counts as inside.
pub fn clip_segment_to_polygon<T: Scalar>(a: Point2<T>, b: Point2<T>, poly: &Polygon2<T>) -> Vec<(T, T)> {
    let r = b - a;
    let len = r.norm();
    if len == T::zero() {
        return if poly.contains_with_tol(a, T::lit(1e-9)) {
            vec![(T::zero(), T::one())]
        } else {
            Vec::new()
        };
    }
    let eps = T::lit(1e-12);
    let mut ts = vec![T::zero(), T::one()];
    for e in poly.edges() {
        let s = e.vector();
        let denom = r.cross(s);
        let qp = e.a - a;
        if denom.abs() <= eps * len * s.norm() {
            // Parallel: collinear overlap contributes the overlap endpoints.
            if qp.cross(r).abs() <= eps * len * len.max(T::one()) {
                for q in [e.a, e.b] {
                    let t = (q - a).dot(r) / (len * len);
                    if t > T::zero() && t < T::one() {
                        ts.push(t);
                    }
                }
            }
            continue;
        }
        let t = qp.cross(s) / denom;
        let u = qp.cross(r) / denom;
        if u >= -eps && u <= T::one() + eps && t > T::zero() && t < T::one() {
            ts.push(t);
        }
    }
    ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ts.dedup_by(|x, y| (*x - *y).abs() <= eps);
    let tol = len * T::lit(1e-9);
    let mut out: Vec<(T, T)> = Vec::new();
    for w in ts.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if t1 - t0 <= eps {
            continue;
        }
        let mid = a + r * ((t0 + t1) * T::lit(0.5));
        if poly.contains_with_tol(mid, tol) {
            match out.last_mut() {
                Some(last) if (last.1 - t0).abs() <= eps => last.1 = t1,
                _ => out.push((t0, t1)),
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(s: f64) -> Vec<Point2<f64>> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(s, 0.0),
            Point2::new(s, s),
            Point2::new(0.0, s),
        ]
    }

    #[test]
    fn area_and_orientation() {
        let mut r = square(2.0);
        assert_eq!(signed_area(&r), 4.0);
        r.reverse();
        assert_eq!(signed_area(&r), -4.0);
        let p = Polygon2::new(r, vec![]);
        assert_eq!(signed_area(&p.outer), 4.0);
    }

    #[test]
    fn simple_ring_checks() {
        assert!(ring_is_simple(&square(1.0)));
        let bowtie = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        assert!(!ring_is_simple(&bowtie));
        assert!(!ring_is_simple(&square(1.0)[..2]));
    }

    #[test]
    fn interior_point_of_l_shape() {
        let l = vec![
            Point2::new(0.0, 0.0),
            Point2::new(4.0, 0.0),
            Point2::new(4.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 4.0),
            Point2::new(0.0, 4.0),
        ];
        let p = interior_point(&[l.clone()]).unwrap();
        assert!(ring_contains(&l, p));
    }

    #[test]
    fn clip_crossing_segment() {
        let poly = Polygon2::new(square(10.0), vec![]);
        let iv = clip_segment_to_polygon(Point2::new(-5.0, 5.0), Point2::new(5.0, 5.0), &poly);
        assert_eq!(iv.len(), 1);
        assert!((iv[0].0 - 0.5).abs() < 1e-12 && (iv[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clip_through_hole_gives_two_pieces() {
        let hole = vec![
            Point2::new(4.0, 4.0),
            Point2::new(6.0, 4.0),
            Point2::new(6.0, 6.0),
            Point2::new(4.0, 6.0),
        ];
        let poly = Polygon2::new(square(10.0), vec![hole]);
        let iv = clip_segment_to_polygon(Point2::new(-1.0, 5.0), Point2::new(11.0, 5.0), &poly);
        assert_eq!(iv.len(), 2);
        assert!((poly.area() - 96.0).abs() < 1e-12);
    }
}
