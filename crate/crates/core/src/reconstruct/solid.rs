//! Polyhedral building solids and their validity checks.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::geom::{Point2, Point3};
use crate::{Error, Result};

pub const PLANARITY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceRole {
    Roof,
    Wall,
    Floor,
}

impl FaceRole {
    pub fn name(self) -> &'static str {
        match self {
            FaceRole::Roof => "roof",
            FaceRole::Wall => "wall",
            FaceRole::Floor => "floor",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Face {
    /// Outer ring first, then holes; vertex indices, outward orientation.
    pub rings: Vec<Vec<usize>>,
    pub role: FaceRole,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolidModel {
    pub building_id: String,
    pub vertices: Vec<Point3<f64>>,
    pub faces: Vec<Face>,
}

/// Newell normal (not normalised) of a set of rings.
pub fn newell(vertices: &[Point3<f64>], rings: &[Vec<usize>]) -> Point3<f64> {
    let mut n = Point3::new(0.0, 0.0, 0.0);
    for ring in rings {
        for i in 0..ring.len() {
            let (a, b) = (vertices[ring[i]], vertices[ring[(i + 1) % ring.len()]]);
            n.x += (a.y - b.y) * (a.z + b.z);
            n.y += (a.z - b.z) * (a.x + b.x);
            n.z += (a.x - b.x) * (a.y + b.y);
        }
    }
    n * 0.5
}

/// Projects 3D points to 2D by dropping the dominant axis of `normal`,
/// keeping the orientation seen from the normal's side.
pub fn project_2d(points: &[Point3<f64>], normal: Point3<f64>) -> Vec<Point2<f64>> {
    let (ax, ay, az) = (normal.x.abs(), normal.y.abs(), normal.z.abs());
    points
        .iter()
        .map(|p| {
            if az >= ax && az >= ay {
                if normal.z >= 0.0 { Point2::new(p.x, p.y) } else { Point2::new(p.y, p.x) }
            } else if ax >= ay {
                if normal.x >= 0.0 { Point2::new(p.y, p.z) } else { Point2::new(p.z, p.y) }
            } else if normal.y >= 0.0 {
                Point2::new(p.z, p.x)
            } else {
                Point2::new(p.x, p.z)
            }
        })
        .collect()
}

/// Triangles (as 3D vertex triples) covering the face.
pub fn triangulate_face(vertices: &[Point3<f64>], face: &Face) -> Vec<[Point3<f64>; 3]> {
    let normal = newell(vertices, &face.rings);
    let pts: Vec<Point3<f64>> = face.rings.iter().flatten().map(|&i| vertices[i]).collect();
    let flat = project_2d(&pts, normal);
    let mut coords = Vec::with_capacity(flat.len() * 2);
    for p in &flat {
        coords.push(p.x);
        coords.push(p.y);
    }
    let mut holes = Vec::new();
    let mut acc = 0;
    for (k, r) in face.rings.iter().enumerate() {
        if k > 0 {
            holes.push(acc);
        }
        acc += r.len();
    }
    let idx = earcutr::earcut(&coords, &holes, 2).unwrap_or_default();
    idx.chunks_exact(3).map(|t| [pts[t[0]], pts[t[1]], pts[t[2]]]).collect()
}

pub fn face_area(vertices: &[Point3<f64>], face: &Face) -> f64 {
    newell(vertices, &face.rings).norm()
}

impl SolidModel {
    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn count_role(&self, role: FaceRole) -> usize {
        self.faces.iter().filter(|f| f.role == role).count()
    }

    /// Signed volume by the divergence theorem (fan per ring).
    pub fn volume(&self) -> f64 {
        let mut v = 0.0;
        for f in &self.faces {
            for ring in &f.rings {
                let p0 = self.vertices[ring[0]];
                for i in 1..ring.len().saturating_sub(1) {
                    let (p1, p2) = (self.vertices[ring[i]], self.vertices[ring[i + 1]]);
                    v += p0.dot(p1.cross(p2));
                }
            }
        }
        v / 6.0
    }

    pub fn surface_area(&self) -> f64 {
        self.faces.iter().map(|f| face_area(&self.vertices, f)).sum()
    }

    fn edge_desc(&self, a: usize, b: usize) -> String {
        let (p, q) = (self.vertices[a], self.vertices[b]);
        format!("({}, {}, {})-({}, {}, {})", p.x, p.y, p.z, q.x, q.y, q.z)
    }

    /// Watertight, 2-manifold, planar, outward-oriented.
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Reconstruction(format!("solid {}: {m}", self.building_id)));
        if self.faces.is_empty() {
            return err("no faces".into());
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &self.faces {
            for ring in &f.rings {
                if ring.len() < 3 {
                    return err("ring with fewer than 3 vertices".into());
                }
                for i in 0..ring.len() {
                    let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
                    if a == b {
                        return err(format!("repeated vertex at {}", self.edge_desc(a, b)));
                    }
                    *directed.entry((a, b)).or_insert(0) += 1;
                }
            }
        }
        let mut keys: Vec<_> = directed.iter().map(|(&k, &n)| (k, n)).collect();
        keys.sort_unstable();
        for ((a, b), n) in keys {
            if n != 1 || directed.get(&(b, a)) != Some(&1) {
                return err(format!("non-manifold edge at {}", self.edge_desc(a, b)));
            }
        }
        // Corners around each vertex must form one cycle.
        let mut corners: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
        for f in &self.faces {
            for ring in &f.rings {
                let n = ring.len();
                for i in 0..n {
                    corners.entry(ring[i]).or_default().push((ring[(i + n - 1) % n], ring[(i + 1) % n]));
                }
            }
        }
        let mut verts: Vec<_> = corners.keys().copied().collect();
        verts.sort_unstable();
        for v in verts {
            let cs = &corners[&v];
            let by_prev: HashMap<usize, usize> = cs.iter().enumerate().map(|(k, &(p, _))| (p, k)).collect();
            let mut k = 0;
            let mut steps = 0;
            loop {
                let Some(&nk) = by_prev.get(&cs[k].1) else {
                    return err(format!("open fan at vertex {v}"));
                };
                k = nk;
                steps += 1;
                if k == 0 {
                    break;
                }
                if steps > cs.len() {
                    return err(format!("broken fan at vertex {v}"));
                }
            }
            if steps != cs.len() {
                let p = self.vertices[v];
                return err(format!("non-manifold vertex at ({}, {}, {})", p.x, p.y, p.z));
            }
        }
        for (fi, f) in self.faces.iter().enumerate() {
            let n = newell(&self.vertices, &f.rings);
            let len = n.norm();
            if len == 0.0 {
                return err(format!("face {fi} has zero area"));
            }
            let n = n * (1.0 / len);
            let pts: Vec<Point3<f64>> = f.rings.iter().flatten().map(|&i| self.vertices[i]).collect();
            let c = pts.iter().fold(Point3::new(0.0, 0.0, 0.0), |a, &p| a + p) * (1.0 / pts.len() as f64);
            for p in &pts {
                if (*p - c).dot(n).abs() > PLANARITY_TOL {
                    return err(format!("face {fi} is not planar"));
                }
            }
        }
        if !(self.volume() > 0.0) {
            return err("non-positive volume".into());
        }
        Ok(())
    }
}
