//! Cell merging driven by the fitted roof planes.

use super::fit::{fit_indices, Payload};
use super::Partition;
use crate::geodata::PointCloud;
use crate::geom::Point2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MergeParams {
    /// Radians.
    pub angle_tol: f64,
    /// Metres.
    pub offset_tol: f64,
    pub min_points: usize,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self { angle_tol: 5f64.to_radians(), offset_tol: 0.2, min_points: 10 }
    }
}

fn payload(p: &Partition) -> Payload {
    p.cells.iter().map(|c| (c.id, (c.points.clone(), c.plane))).collect()
}

/// Merges cell `b` into cell `a` and refits the union.
fn merge_pair(p: &mut Partition, cloud: &PointCloud, a: usize, b: usize, min_points: usize) {
    let (keep, gone) = (a.min(b), a.max(b));
    let mut pl = payload(p);
    let (gone_pts, _) = pl.remove(&gone).unwrap_or_default();
    let entry = pl.get_mut(&keep).expect("cell exists");
    entry.0.extend(gone_pts);
    entry.0.sort_unstable();
    let refit = fit_indices(cloud, &entry.0, min_points);
    entry.1 = refit.or(entry.1);
    for c in p.face_cell.iter_mut().flatten() {
        if *c == gone {
            *c = keep;
        }
    }
    p.rebuild(pl);
}

/// Length-weighted mean of |z_a − z_b| at the midpoints of the edges shared
/// by cells `a` and `b`.
pub fn shared_edge_offset(p: &Partition, a: usize, b: usize) -> Option<f64> {
    let (pa, pb) = (p.cells[a].plane?, p.cells[b].plane?);
    let arr = &p.arrangement;
    let (mut sum, mut len) = (0.0, 0.0);
    for h in 0..arr.half_edge_count() {
        if p.cell_of_half_edge(h) == Some(a) && p.cell_of_half_edge(h ^ 1) == Some(b) {
            let m: Point2<f64> = (arr.vertices[arr.origin(h)] + arr.vertices[arr.target(h)]) / 2.0;
            let l = arr.half_edge_length(h);
            sum += l * (pa.z_at(m) - pb.z_at(m)).abs();
            len += l;
        }
    }
    (len > 0.0).then(|| sum / len)
}

pub fn merge_cells_elevation_prior(p: &mut Partition, cloud: &PointCloud, params: &MergeParams) {
    // Unfitted cells go to the fitted neighbour with the longest shared edge.
    loop {
        let pick = p.cells.iter().filter(|c| c.plane.is_none()).find_map(|c| {
            c.neighbors
                .iter()
                .filter(|(n, _)| p.cells[*n].plane.is_some())
                .max_by(|x, y| x.1.total_cmp(&y.1).then(y.0.cmp(&x.0)))
                .map(|&(n, _)| (c.id, n))
        });
        let Some((u, f)) = pick else { break };
        // Keep the fitted cell's plane if the union still lacks support.
        let plane = p.cells[f].plane;
        merge_pair(p, cloud, u, f, params.min_points);
        let kept = u.min(f);
        if p.cells[kept].plane.is_none() {
            p.cells[kept].plane = plane;
        }
    }
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for c in &p.cells {
            let Some(pa) = c.plane else { continue };
            for &(n, _) in &c.neighbors {
                if n <= c.id {
                    continue;
                }
                let Some(pb) = p.cells[n].plane else { continue };
                let angle = pa.angle_to(&pb);
                let Some(offset) = shared_edge_offset(p, c.id, n) else { continue };
                if angle > params.angle_tol || offset > params.offset_tol {
                    continue;
                }
                let score = angle / params.angle_tol + offset / params.offset_tol;
                if best.is_none_or(|b| score < b.0) {
                    best = Some((score, c.id, n));
                }
            }
        }
        let Some((_, a, b)) = best else { break };
        merge_pair(p, cloud, a, b, params.min_points);
    }
}
