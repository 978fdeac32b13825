//! Subdivision of a footprint by georeferenced rooflines.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RoofPlane;
use crate::arrangement::Arrangement;
use crate::geodata::Footprint;
use crate::geom::{line_intersection, point_segment_distance, ring_contains, signed_area, Point2, Polygon2, Segment2};
use crate::georef_filter::GeoSegment;
use crate::{Error, Result};

/// Vertex merge distance of the footprint arrangement, metres.
pub const ARRANGEMENT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionCell {
    pub id: usize,
    /// Arrangement faces making up the cell.
    pub faces: Vec<usize>,
    /// Boundary rings as arrangement vertex indices; outer rings run
    /// counter-clockwise, holes clockwise.
    pub rings: Vec<Vec<usize>>,
    pub area: f64,
    /// `(neighbour id, shared boundary length)`, ascending by id.
    pub neighbors: Vec<(usize, f64)>,
    /// Point-cloud indices whose (x, y) fall inside the cell.
    pub points: Vec<usize>,
    pub plane: Option<RoofPlane<f64>>,
}

#[derive(Clone, Debug)]
pub struct Partition {
    pub footprint: Footprint,
    pub arrangement: Arrangement,
    /// Cell of every arrangement face, `None` outside the footprint.
    pub face_cell: Vec<Option<usize>>,
    pub cells: Vec<PartitionCell>,
}

impl Partition {
    pub fn ring_points(&self, ring: &[usize]) -> Vec<Point2<f64>> {
        ring.iter().map(|&v| self.arrangement.vertices[v]).collect()
    }

    pub fn cell_rings(&self, c: usize) -> Vec<Vec<Point2<f64>>> {
        self.cells[c].rings.iter().map(|r| self.ring_points(r)).collect()
    }

    pub fn cell_of_half_edge(&self, h: usize) -> Option<usize> {
        self.arrangement.face(h).and_then(|f| self.face_cell[f])
    }

    /// Closed containment test; points on the boundary count as inside.
    pub fn cell_contains(&self, c: usize, p: Point2<f64>, tol: f64) -> bool {
        let rings = self.cell_rings(c);
        let mut inside = false;
        for r in &rings {
            if ring_contains(r, p) {
                inside = !inside;
            }
            for i in 0..r.len() {
                if point_segment_distance(p, r[i], r[(i + 1) % r.len()]) <= tol {
                    return true;
                }
            }
        }
        inside
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    /// Rebuilds rings, areas and adjacency from `face_cell`, renumbering
    /// surviving cells compactly in ascending order of their old ids.
    /// `payload` supplies points and plane for each old id.
    pub(crate) fn rebuild(&mut self, mut payload: BTreeMap<usize, (Vec<usize>, Option<RoofPlane<f64>>)>) {
        let mut old: Vec<usize> = self.face_cell.iter().flatten().copied().collect();
        old.sort_unstable();
        old.dedup();
        let remap: BTreeMap<usize, usize> = old.iter().enumerate().map(|(n, &o)| (o, n)).collect();
        for c in self.face_cell.iter_mut().flatten() {
            *c = remap[c];
        }
        let arr = &self.arrangement;
        let mut cells: Vec<PartitionCell> = old
            .iter()
            .enumerate()
            .map(|(n, o)| {
                let (points, plane) = payload.remove(o).unwrap_or_default();
                PartitionCell {
                    id: n,
                    faces: Vec::new(),
                    rings: Vec::new(),
                    area: 0.0,
                    neighbors: Vec::new(),
                    points,
                    plane,
                }
            })
            .collect();
        for (f, c) in self.face_cell.iter().enumerate() {
            if let Some(c) = *c {
                cells[c].faces.push(f);
                cells[c].area += arr.faces[f].area;
            }
        }
        let face_cell = &self.face_cell;
        let label = |f: Option<usize>| f.and_then(|f| face_cell[f]);
        for cell in cells.iter_mut() {
            let id = cell.id;
            cell.rings = arr.region_boundary(|f| label(f) == Some(id));
        }
        let mut adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); cells.len()];
        for h in 0..arr.half_edge_count() {
            if let (Some(a), Some(b)) = (label(arr.face(h)), label(arr.face(h ^ 1))) {
                if a != b {
                    *adj[a].entry(b).or_insert(0.0) += arr.half_edge_length(h);
                }
            }
        }
        for (cell, m) in cells.iter_mut().zip(adj) {
            cell.neighbors = m.into_iter().collect();
        }
        self.cells = cells;
    }
}

fn ray_hit(origin: Point2<f64>, dir: Point2<f64>, seg: &Segment2<f64>, eps: f64) -> Option<f64> {
    let (t, u) = line_intersection(origin, dir, seg.a, seg.vector(), 1e-12)?;
    (t > eps && (-1e-12..=1.0 + 1e-12).contains(&u)).then_some(t)
}

/// Parameter intervals of `piece` that do not run along a boundary edge,
/// keeping only those at least `tol` long.
fn off_boundary(piece: &Segment2<f64>, poly: &Polygon2<f64>, tol: f64) -> Vec<(f64, f64)> {
    let len = piece.length();
    let dir = piece.vector() / len;
    let line_dist = |p: Point2<f64>| (p - piece.a).cross(dir).abs();
    let mut covered: Vec<(f64, f64)> = poly
        .edges()
        .filter(|e| line_dist(e.a) <= tol && line_dist(e.b) <= tol)
        .map(|e| {
            let (ta, tb) = ((e.a - piece.a).dot(dir) / len, (e.b - piece.a).dot(dir) / len);
            (ta.min(tb).max(0.0), ta.max(tb).min(1.0))
        })
        .filter(|(a, b)| b > a)
        .collect();
    covered.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut out = Vec::new();
    let mut t = 0.0;
    for (a, b) in covered {
        if (a - t) * len >= tol {
            out.push((t, a));
        }
        t = t.max(b);
    }
    if (1.0 - t) * len >= tol {
        out.push((t, 1.0));
    }
    out
}

/// Clips rooflines to the footprint, drops pieces along the boundary and
/// attaches or extends dangling ends.
pub fn prepare_rooflines(footprint: &Footprint, rooflines: &[GeoSegment], snap_tol: f64) -> Result<Vec<Segment2<f64>>> {
    let poly = &footprint.polygon;
    let mut pieces: Vec<Segment2<f64>> = Vec::new();
    for (i, r) in rooflines.iter().enumerate() {
        if !r.g0.is_finite() || !r.g1.is_finite() {
            return Err(Error::Geometry(format!("roofline {i} of building {} has a non-finite endpoint", footprint.id)));
        }
        let s = r.segment();
        for (t0, t1) in crate::geom::clip_segment_to_polygon(s.a, s.b, poly) {
            let piece = Segment2::new(s.at(t0), s.at(t1));
            if piece.length() < snap_tol {
                continue;
            }
            for (u0, u1) in off_boundary(&piece, poly, snap_tol) {
                pieces.push(Segment2::new(piece.at(u0), piece.at(u1)));
            }
        }
    }

    let boundary: Vec<Segment2<f64>> = poly.edges().collect();
    let corners: Vec<Point2<f64>> = poly.rings().flatten().copied().collect();
    for i in 0..pieces.len() {
        for end in 0..2 {
            let (e, other) = if end == 0 { (pieces[i].a, pieces[i].b) } else { (pieces[i].b, pieces[i].a) };
            let obstacles: Vec<Segment2<f64>> = boundary
                .iter()
                .copied()
                .chain(pieces.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, s)| *s))
                .collect();
            let nearest = obstacles
                .iter()
                .map(|s| (s.distance_to(e), *s))
                .min_by(|a, b| a.0.total_cmp(&b.0));
            let new_e = match nearest {
                Some((d, seg)) if d <= snap_tol => {
                    let vertex = corners
                        .iter()
                        .copied()
                        .chain(pieces.iter().enumerate().filter(|&(j, _)| j != i).flat_map(|(_, s)| [s.a, s.b]))
                        .map(|v| (v.dist(e), v))
                        .filter(|(d, _)| *d <= snap_tol)
                        .min_by(|a, b| a.0.total_cmp(&b.0));
                    match vertex {
                        Some((_, v)) => v,
                        None => {
                            let r = seg.vector();
                            seg.at(((e - seg.a).dot(r) / r.norm2()).clamp(0.0, 1.0))
                        }
                    }
                }
                _ => {
                    let dir = (e - other).normalized();
                    obstacles
                        .iter()
                        .filter_map(|s| ray_hit(e, dir, s, snap_tol * 1e-3))
                        .min_by(f64::total_cmp)
                        .map_or(e, |t| e + dir * t)
                }
            };
            if end == 0 {
                pieces[i].a = new_e;
            } else {
                pieces[i].b = new_e;
            }
        }
    }
    pieces.retain(|s| s.length() >= snap_tol);
    Ok(pieces)
}

pub fn partition_footprint(footprint: &Footprint, rooflines: &[GeoSegment], snap_tol: f64) -> Result<Partition> {
    let pieces = prepare_rooflines(footprint, rooflines, snap_tol)?;
    let mut segs: Vec<Segment2<f64>> = footprint.polygon.edges().collect();
    segs.extend(pieces);
    let arrangement = Arrangement::build(&segs, ARRANGEMENT_TOL.min(snap_tol));
    let mut face_cell = vec![None; arrangement.faces.len()];
    let mut next = 0;
    for (f, slot) in face_cell.iter_mut().enumerate() {
        let inside = arrangement.face_interior_point(f).is_some_and(|p| footprint.polygon.contains(p));
        if inside {
            *slot = Some(next);
            next += 1;
        }
    }
    if next == 0 {
        return Err(Error::Geometry(format!("footprint {} produced no cells", footprint.id)));
    }
    let mut part = Partition { footprint: footprint.clone(), arrangement, face_cell, cells: Vec::new() };
    part.rebuild(BTreeMap::new());
    let defect = (part.total_area() - footprint.area()).abs() / footprint.area();
    if defect > 1e-6 {
        return Err(Error::Geometry(format!(
            "partition of {} loses area (relative defect {defect:e})",
            footprint.id
        )));
    }
    debug_assert!(part.cells.iter().all(|c| c.rings.iter().any(|r| signed_area(&part.ring_points(r)) > 0.0)));
    Ok(part)
}
