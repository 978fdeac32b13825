//! Evaluation metrics: roofline completeness, sampled surface distances and
//! face counts.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{Point3, Segment2};
use crate::reconstruct::{triangulate_face, SolidModel};
use crate::{Error, Result, Scalar};

pub const DEFAULT_OFFSET_TOL_PX: f64 = 25.0;
pub const DEFAULT_SAMPLE_STEP_PX: f64 = 1.0;
pub const DEFAULT_DENSITY: f64 = 100.0;
pub const DEFAULT_SEED: u64 = 42;

/// Side of the uniform grid used to find nearby triangles, in metres.
const GRID_CELL: f64 = 1.0;

/// Evenly spaced samples along `s`, never further apart than `step`.
/// Both endpoints are included.
pub fn sample_segment<T: Scalar>(s: &Segment2<T>, step: T) -> Vec<crate::geom::Point2<T>> {
    let n = (s.length() / step).ceil().to_usize().unwrap_or(0).max(1);
    let nt = T::from_usize(n).unwrap();
    (0..=n).map(|i| s.at(T::from_usize(i).unwrap() / nt)).collect()
}

fn coverage<T: Scalar>(covering: &[Segment2<T>], sampled: &[Segment2<T>], tol: T, step: T) -> T {
    let (mut hit, mut total) = (0usize, 0usize);
    for s in sampled {
        for p in sample_segment(s, step) {
            total += 1;
            if covering.iter().any(|c| c.distance_to(p) <= tol) {
                hit += 1;
            }
        }
    }
    T::from_usize(hit).unwrap() / T::from_usize(total).unwrap()
}

/// Fraction of reference samples within `offset_tol` of some extracted
/// segment.
pub fn line_completeness<T: Scalar>(
    extracted: &[Segment2<T>],
    reference: &[Segment2<T>],
    offset_tol: T,
    sample_step: T,
) -> Result<T> {
    if !(offset_tol > T::zero()) || !(sample_step > T::zero()) {
        return Err(Error::Metric("offset_tol and sample_step must be positive".into()));
    }
    if reference.is_empty() {
        return Err(Error::Metric("no reference".into()));
    }
    Ok(coverage(extracted, reference, offset_tol, sample_step))
}

/// The converse of completeness: fraction of extracted samples near the
/// reference. Zero when nothing was extracted.
pub fn line_correctness<T: Scalar>(
    extracted: &[Segment2<T>],
    reference: &[Segment2<T>],
    offset_tol: T,
    sample_step: T,
) -> Result<T> {
    if !(offset_tol > T::zero()) || !(sample_step > T::zero()) {
        return Err(Error::Metric("offset_tol and sample_step must be positive".into()));
    }
    if extracted.is_empty() {
        return Ok(T::zero());
    }
    Ok(coverage(reference, extracted, offset_tol, sample_step))
}

/// Polygonal faces as stored.
pub fn face_count(solid: &SolidModel) -> Result<usize> {
    if solid.faces.is_empty() {
        return Err(Error::Metric(format!("solid {} has no faces", solid.building_id)));
    }
    Ok(solid.faces.len())
}

fn sample_triangle(rng: &mut ChaCha8Rng, t: &[Point3<f64>; 3]) -> Point3<f64> {
    let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
    if u + v > 1.0 {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    t[0] + (t[1] - t[0]) * u + (t[2] - t[0]) * v
}

fn triangle_area(t: &[Point3<f64>; 3]) -> f64 {
    (t[1] - t[0]).cross(t[2] - t[0]).norm() * 0.5
}

/// Area-weighted uniform samples, `ceil(area * density)` per face, plus
/// every vertex of the solid.
pub fn sample_mesh(solid: &SolidModel, density: f64, seed: u64) -> Vec<Point3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = solid.vertices.clone();
    for face in &solid.faces {
        let tris = triangulate_face(&solid.vertices, face);
        let mut cum = Vec::with_capacity(tris.len());
        let mut acc = 0.0;
        for t in &tris {
            acc += triangle_area(t);
            cum.push(acc);
        }
        if !(acc > 0.0) {
            continue;
        }
        let n = (acc * density).ceil() as usize;
        for _ in 0..n {
            let r = rng.random::<f64>() * acc;
            let k = cum.partition_point(|&c| c <= r).min(tris.len() - 1);
            out.push(sample_triangle(&mut rng, &tris[k]));
        }
    }
    out
}

/// Closest point on triangle `abc` to `p` (Voronoi region walk).
pub fn closest_on_triangle(p: Point3<f64>, a: Point3<f64>, b: Point3<f64>, c: Point3<f64>) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Triangulated surface with a uniform grid over triangle bounding boxes.
pub struct SurfaceIndex {
    tris: Vec<[Point3<f64>; 3]>,
    origin: Point3<f64>,
    dims: [i64; 3],
    cells: HashMap<[i64; 3], Vec<usize>>,
}

impl SurfaceIndex {
    pub fn new(solid: &SolidModel) -> Self {
        let tris: Vec<[Point3<f64>; 3]> =
            solid.faces.iter().flat_map(|f| triangulate_face(&solid.vertices, f)).collect();
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in tris.iter().flatten() {
            lo = Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        if tris.is_empty() {
            lo = Point3::new(0.0, 0.0, 0.0);
            hi = lo;
        }
        let dims = [
            ((hi.x - lo.x) / GRID_CELL).floor() as i64 + 1,
            ((hi.y - lo.y) / GRID_CELL).floor() as i64 + 1,
            ((hi.z - lo.z) / GRID_CELL).floor() as i64 + 1,
        ];
        let mut index = Self { tris, origin: lo, dims, cells: HashMap::new() };
        for (k, t) in index.tris.iter().enumerate() {
            let a = index.cell_of(Point3::new(
                t[0].x.min(t[1].x).min(t[2].x),
                t[0].y.min(t[1].y).min(t[2].y),
                t[0].z.min(t[1].z).min(t[2].z),
            ));
            let b = index.cell_of(Point3::new(
                t[0].x.max(t[1].x).max(t[2].x),
                t[0].y.max(t[1].y).max(t[2].y),
                t[0].z.max(t[1].z).max(t[2].z),
            ));
            for i in a[0]..=b[0] {
                for j in a[1]..=b[1] {
                    for l in a[2]..=b[2] {
                        index.cells.entry([i, j, l]).or_default().push(k);
                    }
                }
            }
        }
        index
    }

    fn cell_of(&self, p: Point3<f64>) -> [i64; 3] {
        [
            ((p.x - self.origin.x) / GRID_CELL).floor() as i64,
            ((p.y - self.origin.y) / GRID_CELL).floor() as i64,
            ((p.z - self.origin.z) / GRID_CELL).floor() as i64,
        ]
    }

    /// Exact distance from `p` to the surface.
    pub fn distance(&self, p: Point3<f64>) -> f64 {
        if self.tris.is_empty() {
            return f64::INFINITY;
        }
        let c = self.cell_of(p);
        // Rings beyond this radius lie entirely outside the grid.
        let reach = (0..3)
            .map(|k| (c[k]).abs().max((c[k] - self.dims[k] + 1).abs()))
            .max()
            .unwrap();
        let mut best = f64::INFINITY;
        let mut r = 0i64;
        loop {
            for i in c[0] - r..=c[0] + r {
                for j in c[1] - r..=c[1] + r {
                    for l in c[2] - r..=c[2] + r {
                        let on_shell = (i - c[0]).abs() == r || (j - c[1]).abs() == r || (l - c[2]).abs() == r;
                        if !on_shell {
                            continue;
                        }
                        if let Some(list) = self.cells.get(&[i, j, l]) {
                            for &k in list {
                                let t = &self.tris[k];
                                best = best.min(p.dist(closest_on_triangle(p, t[0], t[1], t[2])));
                            }
                        }
                    }
                }
            }
            // Everything not yet visited is at least r cells away.
            if best <= r as f64 * GRID_CELL || r >= reach {
                return best;
            }
            r += 1;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDistance {
    pub mean: f64,
    pub rmse: f64,
    pub max: f64,
}

/// Symmetric sampled surface distance between two solids.
pub fn hausdorff_metrics(candidate: &SolidModel, reference: &SolidModel, density: f64, seed: u64) -> SurfaceDistance {
    let to_ref = SurfaceIndex::new(reference);
    let to_cand = SurfaceIndex::new(candidate);
    let mut d: Vec<f64> = sample_mesh(candidate, density, seed).into_iter().map(|p| to_ref.distance(p)).collect();
    d.extend(sample_mesh(reference, density, seed).into_iter().map(|p| to_cand.distance(p)));
    if d.is_empty() {
        return SurfaceDistance { mean: 0.0, rmse: 0.0, max: 0.0 };
    }
    let n = d.len() as f64;
    SurfaceDistance {
        mean: d.iter().sum::<f64>() / n,
        rmse: (d.iter().map(|x| x * x).sum::<f64>() / n).sqrt(),
        max: d.iter().copied().fold(0.0, f64::max),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    pub offset_tol_px: f64,
    pub sample_step_px: f64,
    pub pixel_size: f64,
    pub density: f64,
    pub seed: u64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            offset_tol_px: DEFAULT_OFFSET_TOL_PX,
            sample_step_px: DEFAULT_SAMPLE_STEP_PX,
            pixel_size: 1.0,
            density: DEFAULT_DENSITY,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub building_id: String,
    pub faces: usize,
    /// Absent when no reference rooflines were supplied.
    pub completeness: Option<f64>,
    pub correctness: Option<f64>,
    pub mean_hausdorff: f64,
    pub rmse: f64,
    pub max_hausdorff: f64,
    pub parameters: EvalParams,
}

/// Full report for one building. Rooflines are world coordinates; the pixel
/// tolerances are scaled by `params.pixel_size`.
pub fn evaluate_building(
    candidate: &SolidModel,
    reference: &SolidModel,
    rooflines: Option<(&[Segment2<f64>], &[Segment2<f64>])>,
    params: &EvalParams,
) -> Result<EvalReport> {
    let faces = face_count(candidate)?;
    face_count(reference)?;
    let (completeness, correctness) = match rooflines {
        Some((extracted, truth)) => {
            let tol = params.offset_tol_px * params.pixel_size;
            let step = params.sample_step_px * params.pixel_size;
            (
                Some(line_completeness(extracted, truth, tol, step)?),
                Some(line_correctness(extracted, truth, tol, step)?),
            )
        }
        None => (None, None),
    };
    let d = hausdorff_metrics(candidate, reference, params.density, params.seed);
    Ok(EvalReport {
        building_id: candidate.building_id.clone(),
        faces,
        completeness,
        correctness,
        mean_hausdorff: d.mean,
        rmse: d.rmse,
        max_hausdorff: d.max,
        parameters: params.clone(),
    })
}

/// Per-building averages of faces, mean distance and RMSE.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub buildings: usize,
    pub faces: f64,
    pub mean: f64,
    pub rmse: f64,
}

pub fn aggregate(reports: &[EvalReport]) -> Aggregate {
    let n = reports.len();
    if n == 0 {
        return Aggregate { buildings: 0, faces: 0.0, mean: 0.0, rmse: 0.0 };
    }
    let avg = |f: &dyn Fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n as f64;
    Aggregate {
        buildings: n,
        faces: avg(&|r| r.faces as f64),
        mean: avg(&|r| r.mean_hausdorff),
        rmse: avg(&|r| r.rmse),
    }
}

pub fn aggregate_csv(a: &Aggregate) -> String {
    let mut s = String::from("buildings,faces,mean,rmse\n");
    let _ = writeln!(s, "{},{},{},{}", a.buildings, a.faces, a.mean, a.rmse);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point2;
    use crate::reconstruct::{Face, FaceRole};

    pub(crate) fn cuboid(id: &str, lo: Point3<f64>, hi: Point3<f64>) -> SolidModel {
        let v = (0..8)
            .map(|i| {
                Point3::new(
                    if i & 1 == 0 { lo.x } else { hi.x },
                    if i & 2 == 0 { lo.y } else { hi.y },
                    if i & 4 == 0 { lo.z } else { hi.z },
                )
            })
            .collect();
        let quads: [([usize; 4], FaceRole); 6] = [
            ([0, 2, 3, 1], FaceRole::Floor),
            ([4, 5, 7, 6], FaceRole::Roof),
            ([0, 1, 5, 4], FaceRole::Wall),
            ([2, 6, 7, 3], FaceRole::Wall),
            ([0, 4, 6, 2], FaceRole::Wall),
            ([1, 3, 7, 5], FaceRole::Wall),
        ];
        SolidModel {
            building_id: id.into(),
            vertices: v,
            faces: quads.iter().map(|(q, r)| Face { rings: vec![q.to_vec()], role: *r }).collect(),
        }
    }

    #[test]
    fn cuboid_fixture_is_valid() {
        let c = cuboid("c", Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 2.0, 3.0));
        c.validate().unwrap();
        assert!((c.volume() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn completeness_trivial_cases() {
        let r = vec![Segment2::new(Point2::new(0.0, 0.0), Point2::new(10.0, 0.0))];
        assert_eq!(line_completeness(&r, &r, 1.0, 1.0).unwrap(), 1.0);
        assert_eq!(line_completeness(&[], &r, 1.0, 1.0).unwrap(), 0.0);
        assert!(line_completeness(&r, &[], 1.0, 1.0).is_err());
        assert_eq!(line_correctness(&[], &r, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn completeness_threshold_is_inclusive() {
        let r = vec![Segment2::new(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0))];
        let tol = 0.25;
        let at = vec![Segment2::new(Point2::new(0.0, tol), Point2::new(1.0, tol))];
        let past = vec![Segment2::new(Point2::new(0.0, 1.01 * tol), Point2::new(1.0, 1.01 * tol))];
        assert_eq!(line_completeness(&at, &r, tol, 0.1).unwrap(), 1.0);
        assert_eq!(line_completeness(&past, &r, tol, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn completeness_in_f32() {
        let r = vec![Segment2::new(Point2::new(0.0f32, 0.0), Point2::new(4.0, 0.0))];
        let e = vec![Segment2::new(Point2::new(0.0f32, 0.5), Point2::new(2.0, 0.5))];
        // Samples at x = 0..=4; the first three are covered.
        assert_eq!(line_completeness(&e, &r, 1.0, 1.0).unwrap(), 0.6);
    }

    #[test]
    fn unit_face_sampling() {
        let c = cuboid("c", Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 1.0, 1.0));
        let s = sample_mesh(&c, 100.0, 42);
        assert!(s.len() >= 8 + 600);
        let index = SurfaceIndex::new(&c);
        assert!(s.iter().all(|&p| index.distance(p) < 1e-12));
        // Deterministic under the seed.
        assert_eq!(s, sample_mesh(&c, 100.0, 42));
    }

    #[test]
    fn closest_point_regions() {
        let (a, b, c) = (Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0));
        assert_eq!(closest_on_triangle(Point3::new(-1.0, -1.0, 0.0), a, b, c), a);
        assert!(closest_on_triangle(Point3::new(0.2, 0.2, 5.0), a, b, c).dist(Point3::new(0.2, 0.2, 0.0)) < 1e-15);
        let e = closest_on_triangle(Point3::new(1.0, 1.0, 0.0), a, b, c);
        assert!((e.x - 0.5).abs() < 1e-12 && (e.y - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identical_solids_have_zero_distance() {
        let c = cuboid("c", Point3::new(0.0, 0.0, 0.0), Point3::new(2.0, 3.0, 4.0));
        let d = hausdorff_metrics(&c, &c, 50.0, 42);
        assert!(d.mean < 1e-12 && d.rmse < 1e-12 && d.max < 1e-12);
    }

    #[test]
    fn aggregate_is_arithmetic_mean() {
        let mk = |m: f64| EvalReport {
            building_id: "x".into(),
            faces: 6,
            completeness: None,
            correctness: None,
            mean_hausdorff: m,
            rmse: m,
            max_hausdorff: m,
            parameters: EvalParams::default(),
        };
        let a = aggregate(&[mk(0.2), mk(0.4)]);
        assert!((a.mean - 0.3).abs() < 1e-15);
        assert_eq!(a.faces, 6.0);
        assert!(aggregate_csv(&a).starts_with("buildings,faces,mean,rmse\n2,6,"));
    }

    #[test]
    fn empty_solid_is_metric_error() {
        let s = SolidModel { building_id: "e".into(), vertices: vec![], faces: vec![] };
        assert!(matches!(face_count(&s), Err(Error::Metric(_))));
    }
}
