//! Polygon union and outward offsetting, backed by `geo`'s boolean overlay.

use geo::{BooleanOps, Coord, LineString, MultiPolygon, Polygon};

use super::{signed_area, Point2, Polygon2};
use crate::{Error, Result};

pub(crate) fn to_geo(p: &Polygon2<f64>) -> Polygon<f64> {
    let ring = |r: &Vec<Point2<f64>>| {
        let mut cs: Vec<Coord<f64>> = r.iter().map(|q| Coord { x: q.x, y: q.y }).collect();
        if let Some(&first) = cs.first() {
            cs.push(first);
        }
        LineString::new(cs)
    };
    Polygon::new(ring(&p.outer), p.holes.iter().map(ring).collect())
}

pub(crate) fn from_geo(p: &Polygon<f64>) -> Polygon2<f64> {
    let ring = |ls: &LineString<f64>| {
        let mut pts: Vec<Point2<f64>> = ls.0.iter().map(|c| Point2::new(c.x, c.y)).collect();
        if pts.len() > 1 && pts.first() == pts.last() {
            pts.pop();
        }
        pts
    };
    Polygon2::new(ring(p.exterior()), p.interiors().iter().map(ring).collect())
}

/// Union of a set of polygons. The result may have several parts.
pub fn union_all(polys: &[Polygon2<f64>]) -> Vec<Polygon2<f64>> {
    let gs: Vec<Polygon<f64>> = polys.iter().map(to_geo).collect();
    let mp: MultiPolygon<f64> = geo::unary_union(gs.iter());
    mp.0.iter().map(from_geo).filter(|p| p.area() > 0.0).collect()
}

pub(crate) fn union_pair(a: &Polygon2<f64>, b: &Polygon2<f64>) -> Vec<Polygon2<f64>> {
    let mp = to_geo(a).union(&to_geo(b));
    mp.0.iter().map(from_geo).filter(|p| p.area() > 0.0).collect()
}

fn disk(c: Point2<f64>, radius: f64, chords_per_quarter: usize) -> Polygon2<f64> {
    let n = 4 * chords_per_quarter.max(1);
    let step = std::f64::consts::TAU / n as f64;
    let ring = (0..n)
        .map(|k| {
            let a = step * k as f64;
            Point2::new(c.x + radius * a.cos(), c.y + radius * a.sin())
        })
        .collect();
    Polygon2::new(ring, vec![])
}

/// Minkowski sum of the polygon with a disk of `radius`, the disk being a
/// regular polygon with `chords_per_quarter` chords per 90° of arc. Holes
/// shrink by the same radius and vanish when fully covered.
pub fn buffer_polygon(poly: &Polygon2<f64>, radius: f64, chords_per_quarter: usize) -> Result<Polygon2<f64>> {
    if poly.outer.len() < 3 || signed_area(&poly.outer) == 0.0 {
        return Err(Error::Geometry("cannot buffer a degenerate polygon".into()));
    }
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::Geometry(format!("invalid buffer radius {radius}")));
    }
    if radius == 0.0 {
        return Ok(poly.clone());
    }
    let mut pieces = vec![poly.clone()];
    for ring in poly.rings() {
        let n = ring.len();
        for i in 0..n {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            let d = (b - a).normalized();
            if d.norm2() == 0.0 {
                continue;
            }
            let off = d.perp() * radius;
            pieces.push(Polygon2::new(vec![a - off, b - off, b + off, a + off], vec![]));
            pieces.push(disk(a, radius, chords_per_quarter));
        }
    }
    let parts = union_all(&pieces);
    parts
        .into_iter()
        .max_by(|x, y| x.area().partial_cmp(&y.area()).unwrap())
        .ok_or_else(|| Error::Geometry("buffer produced an empty polygon".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point2<f64>> {
        vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ]
    }

    #[test]
    fn union_of_edge_sharing_squares() {
        let a = Polygon2::new(rect(0.0, 0.0, 1.0, 1.0), vec![]);
        let b = Polygon2::new(rect(1.0, 0.0, 2.0, 1.0), vec![]);
        let u = union_all(&[a, b]);
        assert_eq!(u.len(), 1);
        assert!((u[0].area() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn buffer_area_matches_minkowski_formula() {
        let sq = Polygon2::new(rect(0.0, 0.0, 1.0, 1.0), vec![]);
        let b = buffer_polygon(&sq, 60.0, 8).unwrap();
        let exact = 1.0 + 4.0 * 60.0 + std::f64::consts::PI * 3600.0;
        assert!((b.area() - exact).abs() / exact < 0.01, "{}", b.area());
        assert!(b.area() < exact);
    }

    #[test]
    fn small_hole_is_filled() {
        let p = Polygon2::new(rect(0.0, 0.0, 300.0, 300.0), vec![rect(100.0, 100.0, 150.0, 150.0)]);
        let b = buffer_polygon(&p, 60.0, 8).unwrap();
        assert!(b.holes.is_empty());
        let big = Polygon2::new(rect(0.0, 0.0, 500.0, 500.0), vec![rect(100.0, 100.0, 400.0, 400.0)]);
        let b = buffer_polygon(&big, 60.0, 8).unwrap();
        assert_eq!(b.holes.len(), 1);
    }
}
