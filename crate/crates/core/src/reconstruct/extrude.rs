//! Extrusion of a fitted partition into a closed solid.

use std::collections::HashMap;

use super::solid::{Face, FaceRole, SolidModel};
use super::{Partition, RoofPlane};
use crate::geom::{ring_contains, signed_area, Point2, Point3};
use crate::{Error, Result};

/// Heights closer than this at one plan vertex share a 3D vertex.
pub const WELD_TOL: f64 = 1e-6;

/// Height clusters at each plan vertex.
struct Levels {
    /// Per plan vertex: `(mean height, 3D vertex id)` ascending.
    at: Vec<Vec<(f64, usize)>>,
    vertices: Vec<Point3<f64>>,
}

impl Levels {
    fn build(plan: &[Point2<f64>], samples: &[Vec<f64>]) -> Levels {
        let mut at = vec![Vec::new(); plan.len()];
        let mut vertices = Vec::new();
        for (v, zs) in samples.iter().enumerate() {
            let mut zs = zs.clone();
            zs.sort_by(f64::total_cmp);
            let mut k = 0;
            while k < zs.len() {
                let mut j = k + 1;
                while j < zs.len() && zs[j] - zs[j - 1] <= WELD_TOL {
                    j += 1;
                }
                // Mean over distinct values so repeated samples do not bias it.
                let mut vals = zs[k..j].to_vec();
                vals.dedup();
                let z = vals.iter().sum::<f64>() / vals.len() as f64;
                at[v].push((z, vertices.len()));
                vertices.push(Point3::new(plan[v].x, plan[v].y, z));
                k = j;
            }
        }
        Levels { at, vertices }
    }

    fn slot(&self, v: usize, z: f64) -> usize {
        let lv = &self.at[v];
        (0..lv.len())
            .min_by(|&a, &b| (lv[a].0 - z).abs().total_cmp(&(lv[b].0 - z).abs()))
            .expect("vertex has levels")
    }

    fn id(&self, v: usize, z: f64) -> usize {
        self.at[v][self.slot(v, z)].1
    }

    /// Vertex ids strictly between heights `from` and `to` at `v`, in travel order.
    fn between(&self, v: usize, from: f64, to: f64) -> Vec<usize> {
        let (a, b) = (self.slot(v, from), self.slot(v, to));
        if a < b {
            (a + 1..b).map(|k| self.at[v][k].1).collect()
        } else {
            (b + 1..a).rev().map(|k| self.at[v][k].1).collect()
        }
    }
}

fn clean_ring(mut ring: Vec<usize>) -> Vec<usize> {
    ring.dedup();
    while ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    ring
}

/// Groups rings into faces: every positive ring starts a face and each
/// negative ring joins the smallest positive ring containing it.
fn group_rings(plan: &[Point2<f64>], rings: Vec<Vec<usize>>) -> Vec<Vec<Vec<usize>>> {
    let pts = |r: &[usize]| r.iter().map(|&v| plan[v]).collect::<Vec<_>>();
    let (outers, holes): (Vec<_>, Vec<_>) = rings.into_iter().partition(|r| signed_area(&pts(r)) > 0.0);
    let mut faces: Vec<Vec<Vec<usize>>> = outers.into_iter().map(|r| vec![r]).collect();
    for h in holes {
        let probe = plan[h[0]];
        let target = faces
            .iter()
            .enumerate()
            .filter(|(_, f)| ring_contains(&pts(&f[0]), probe))
            .min_by(|a, b| signed_area(&pts(&a.1[0])).total_cmp(&signed_area(&pts(&b.1[0]))))
            .map(|(i, _)| i);
        if let Some(i) = target {
            faces[i].push(h);
        }
    }
    faces
}

fn is_corner(prev: Point2<f64>, cur: Point2<f64>, next: Point2<f64>) -> bool {
    let (a, b) = (cur - prev, next - cur);
    a.cross(b).abs() > 1e-12 * a.norm() * b.norm() || a.dot(b) <= 0.0
}

pub fn extrude_solid(p: &Partition, base_elevation: f64) -> Result<SolidModel> {
    let id = &p.footprint.id;
    let planes: Vec<RoofPlane<f64>> = p
        .cells
        .iter()
        .map(|c| c.plane.ok_or_else(|| Error::Reconstruction(format!("building {id}: cell {} has no roof plane", c.id))))
        .collect::<Result<_>>()?;
    let arr = &p.arrangement;
    let mut plan = arr.vertices.clone();
    let z = |c: usize, pt: Point2<f64>| planes[c].z_at(pt);

    let mut half: HashMap<(usize, usize), usize> = HashMap::new();
    for h in 0..arr.half_edge_count() {
        half.insert((arr.origin(h), arr.target(h)), h);
    }

    // Split interior edges where the two roof planes cross.
    let mut split: HashMap<(usize, usize), usize> = HashMap::new();
    let mut interior: Vec<(usize, usize, usize, usize)> = Vec::new();
    for h in 0..arr.half_edge_count() {
        let (Some(a), Some(b)) = (p.cell_of_half_edge(h), p.cell_of_half_edge(h ^ 1)) else { continue };
        if a >= b {
            continue;
        }
        let (u, v) = (arr.origin(h), arr.target(h));
        let (pu, pv) = (plan[u], plan[v]);
        let (du, dv) = (z(a, pu) - z(b, pu), z(a, pv) - z(b, pv));
        if (du > WELD_TOL && dv < -WELD_TOL) || (du < -WELD_TOL && dv > WELD_TOL) {
            let x = plan.len();
            plan.push(pu.lerp(pv, du / (du - dv)));
            split.insert((u.min(v), u.max(v)), x);
            interior.push((a, b, u, x));
            interior.push((a, b, x, v));
        } else {
            interior.push((a, b, u, v));
        }
    }
    let apply_splits = |ring: &[usize]| {
        let mut out = Vec::with_capacity(ring.len());
        for i in 0..ring.len() {
            let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
            out.push(a);
            if let Some(&x) = split.get(&(a.min(b), a.max(b))) {
                out.push(x);
            }
        }
        out
    };
    let cell_rings: Vec<Vec<Vec<usize>>> =
        p.cells.iter().map(|c| c.rings.iter().map(|r| apply_splits(r)).collect()).collect();
    let outline = arr.region_boundary(|f| f.and_then(|f| p.face_cell[f]).is_some());

    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); plan.len()];
    for (c, rings) in cell_rings.iter().enumerate() {
        for &v in rings.iter().flatten() {
            let h = z(c, plan[v]);
            if !(h > base_elevation + WELD_TOL) {
                return Err(Error::Reconstruction(format!(
                    "building {id}: roof height {h} at ({}, {}) is not above base {base_elevation}",
                    plan[v].x, plan[v].y
                )));
            }
            samples[v].push(h);
        }
    }
    for &v in outline.iter().flatten() {
        samples[v].push(base_elevation);
    }
    let lv = Levels::build(&plan, &samples);
    let top = |c: usize, v: usize| lv.id(v, z(c, plan[v]));
    let ground = |v: usize| lv.id(v, base_elevation);

    let mut faces = Vec::new();
    for (c, rings) in cell_rings.iter().enumerate() {
        for group in group_rings(&plan, rings.clone()) {
            let rings = group.iter().map(|r| r.iter().map(|&v| top(c, v)).collect()).collect();
            faces.push(Face { rings, role: FaceRole::Roof });
        }
    }

    for &(a, b, u, v) in &interior {
        let (za_u, zb_u, za_v, zb_v) = (z(a, plan[u]), z(b, plan[u]), z(a, plan[v]), z(b, plan[v]));
        let mut ring = vec![lv.id(v, za_v), lv.id(u, za_u)];
        ring.extend(lv.between(u, za_u, zb_u));
        ring.push(lv.id(u, zb_u));
        ring.push(lv.id(v, zb_v));
        ring.extend(lv.between(v, zb_v, za_v));
        let ring = clean_ring(ring);
        if ring.len() >= 3 {
            faces.push(Face { rings: vec![ring], role: FaceRole::Wall });
        }
    }

    let left_cell = |u: usize, v: usize| -> Result<usize> {
        half.get(&(u, v))
            .and_then(|&h| p.cell_of_half_edge(h))
            .ok_or_else(|| Error::Reconstruction(format!("building {id}: outline edge {u}-{v} has no cell")))
    };
    for ring in &outline {
        let n = ring.len();
        let Some(start) = (0..n).find(|&i| is_corner(plan[ring[(i + n - 1) % n]], plan[ring[i]], plan[ring[(i + 1) % n]]))
        else {
            continue;
        };
        let rot: Vec<usize> = (0..n).map(|k| ring[(start + k) % n]).collect();
        let mut k = 0;
        while k < n {
            // Collinear run rot[k] .. rot[m].
            let mut m = k + 1;
            while m < n && !is_corner(plan[rot[m - 1]], plan[rot[m]], plan[rot[(m + 1) % n]]) {
                m += 1;
            }
            let run: Vec<usize> = (k..=m).map(|i| rot[i % n]).collect();
            let cells: Vec<usize> = run.windows(2).map(|w| left_cell(w[0], w[1])).collect::<Result<_>>()?;
            let last = run.len() - 1;
            let mut wall: Vec<usize> = run.iter().map(|&v| ground(v)).collect();
            let z_end = z(cells[last - 1], plan[run[last]]);
            wall.extend(lv.between(run[last], base_elevation, z_end));
            wall.push(lv.id(run[last], z_end));
            for i in (0..last).rev() {
                let zi = z(cells[i], plan[run[i]]);
                wall.push(lv.id(run[i], zi));
                if i > 0 {
                    let zp = z(cells[i - 1], plan[run[i]]);
                    wall.extend(lv.between(run[i], zi, zp));
                    wall.push(lv.id(run[i], zp));
                } else {
                    wall.extend(lv.between(run[0], zi, base_elevation));
                }
            }
            faces.push(Face { rings: vec![clean_ring(wall)], role: FaceRole::Wall });
            k = m;
        }
    }

    for group in group_rings(&plan, outline.clone()) {
        let rings = group.iter().map(|r| r.iter().rev().map(|&v| ground(v)).collect()).collect();
        faces.push(Face { rings, role: FaceRole::Floor });
    }

    let solid = SolidModel { building_id: id.clone(), vertices: lv.vertices, faces };
    solid.validate()?;
    Ok(solid)
}
