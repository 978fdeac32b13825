//! Point assignment and least-squares roof planes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Partition;
use crate::geodata::{PointCloud, PointIndex};
use crate::geom::{Point2, Point3};
use crate::{Error, Result, Scalar};

/// Roof plane `z = a·x + b·y + d` with the RMS of its vertical residuals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoofPlane<T> {
    pub a: T,
    pub b: T,
    pub d: T,
    pub rms: T,
}

impl<T: Scalar> RoofPlane<T> {
    pub fn flat(z: T) -> Self {
        Self { a: T::zero(), b: T::zero(), d: z, rms: T::zero() }
    }

    pub fn z_at(&self, p: Point2<T>) -> T {
        self.a * p.x + self.b * p.y + self.d
    }

    /// Upward unit normal.
    pub fn normal(&self) -> Point3<T> {
        Point3::new(-self.a, -self.b, T::one()).normalized()
    }

    /// Angle between the two planes' normals, radians.
    pub fn angle_to(&self, o: &Self) -> T {
        let c = self.normal().dot(o.normal()).min(T::one()).max(-T::one());
        // acos loses precision near 0; use the cross product norm as well.
        let s = self.normal().cross(o.normal()).norm();
        s.atan2(c)
    }
}

/// Least-squares plane minimising vertical residuals. `None` when fewer than
/// three points or when the points are (nearly) collinear in plan.
pub fn fit_plane<T: Scalar>(points: &[Point3<T>]) -> Option<RoofPlane<T>> {
    if points.len() < 3 {
        return None;
    }
    let n = T::from_usize(points.len())?;
    let (mut cx, mut cy, mut cz) = (T::zero(), T::zero(), T::zero());
    for p in points {
        cx = cx + p.x;
        cy = cy + p.y;
        cz = cz + p.z;
    }
    let (cx, cy, cz) = (cx / n, cy / n, cz / n);
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    for p in points {
        let (dx, dy, dz) = (p.x - cx, p.y - cy, p.z - cz);
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
        sxz = sxz + dx * dz;
        syz = syz + dy * dz;
    }
    let det = sxx * syy - sxy * sxy;
    if !(det > T::epsilon().sqrt() * sxx * syy) || det <= T::zero() {
        return None;
    }
    let a = (sxz * syy - syz * sxy) / det;
    let b = (syz * sxx - sxz * sxy) / det;
    let d = cz - a * cx - b * cy;
    let mut ss = T::zero();
    for p in points {
        let r = p.z - (a * p.x + b * p.y + d);
        ss = ss + r * r;
    }
    Some(RoofPlane { a, b, d, rms: (ss / n).sqrt() })
}

/// Fits a plane to the cloud points with the given indices, if at least
/// `min_points` of them.
pub(crate) fn fit_indices(cloud: &PointCloud, idx: &[usize], min_points: usize) -> Option<RoofPlane<f64>> {
    if idx.len() < min_points.max(3) {
        return None;
    }
    let pts: Vec<Point3<f64>> = idx.iter().map(|&i| cloud.points[i]).collect();
    fit_plane(&pts)
}

/// Containment slack for boundary points, metres.
const ASSIGN_TOL: f64 = 1e-9;

pub fn assign_and_fit(partition: &mut Partition, cloud: &PointCloud, min_points: usize) -> Result<()> {
    let (lo, hi) = partition.footprint.polygon.bbox();
    let index = PointIndex::build(cloud, 2.0);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); partition.cells.len()];
    let boxes: Vec<(Point2<f64>, Point2<f64>)> = (0..partition.cells.len())
        .map(|c| {
            let pts: Vec<Point2<f64>> = partition.cell_rings(c).into_iter().flatten().collect();
            pts.iter().fold((pts[0], pts[0]), |(l, h), p| {
                (Point2::new(l.x.min(p.x), l.y.min(p.y)), Point2::new(h.x.max(p.x), h.y.max(p.y)))
            })
        })
        .collect();
    for i in index.query(cloud, lo, hi) {
        let p = cloud.points[i].xy();
        for (c, (l, h)) in boxes.iter().enumerate() {
            let t = ASSIGN_TOL;
            if p.x < l.x - t || p.x > h.x + t || p.y < l.y - t || p.y > h.y + t {
                continue;
            }
            if partition.cell_contains(c, p, t) {
                buckets[c].push(i);
                break;
            }
        }
    }
    for (cell, pts) in partition.cells.iter_mut().zip(buckets) {
        cell.plane = fit_indices(cloud, &pts, min_points);
        cell.points = pts;
    }
    if partition.cells.iter().all(|c| c.plane.is_none()) {
        return Err(Error::Reconstruction("no elevation data".into()));
    }
    Ok(())
}

/// Nearest-rank percentile of `values` (`q` in `[0, 1]`).
pub fn percentile(values: &mut [f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let rank = ((q * values.len() as f64).ceil() as usize).clamp(1, values.len());
    Some(values[rank - 1])
}

pub(crate) type Payload = BTreeMap<usize, (Vec<usize>, Option<RoofPlane<f64>>)>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_ramp() {
        let flat: Vec<_> = (0..20).map(|i| Point3::new((i % 5) as f64, (i / 5) as f64, 3.0)).collect();
        let p = fit_plane(&flat).unwrap();
        assert_eq!((p.a, p.b, p.d, p.rms), (0.0, 0.0, 3.0, 0.0));
        let ramp: Vec<_> = (0..20).map(|i| {
            let (x, y) = ((i % 5) as f64 + 100.0, (i / 5) as f64 - 40.0);
            Point3::new(x, y, 0.5 * x)
        }).collect();
        let p = fit_plane(&ramp).unwrap();
        assert!((p.a - 0.5).abs() < 1e-9 && p.b.abs() < 1e-9 && p.d.abs() < 1e-9);
    }

    #[test]
    fn collinear_is_degenerate() {
        let pts: Vec<_> = (0..10).map(|i| Point3::new(i as f64, 2.0 * i as f64, 1.0)).collect();
        assert!(fit_plane(&pts).is_none());
        assert!(fit_plane(&pts[..2]).is_none());
    }

    #[test]
    fn f32_fit() {
        let pts: Vec<Point3<f32>> = (0..16).map(|i| {
            let (x, y) = ((i % 4) as f32, (i / 4) as f32);
            Point3::new(x, y, 1.0 + 0.25 * y)
        }).collect();
        let p = fit_plane(&pts).unwrap();
        assert!((p.b - 0.25).abs() < 1e-5);
    }

    #[test]
    fn gable_normals_differ() {
        let a = RoofPlane { a: 0.0f64, b: 0.5, d: 0.0, rms: 0.0 };
        let b = RoofPlane { a: 0.0, b: -0.5, d: 0.0, rms: 0.0 };
        assert!((a.angle_to(&b).to_degrees() - 2.0 * 0.5f64.atan().to_degrees()).abs() < 1e-9);
        assert_eq!(a.angle_to(&a), 0.0);
    }

    #[test]
    fn percentile_nearest_rank() {
        let mut v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(percentile(&mut v, 0.05), Some(5.0));
        assert_eq!(percentile(&mut [], 0.5), None);
    }
}
