//! Planar arrangement of line segments as a half-edge structure.
//!
//! Segments are split at every mutual intersection (and at endpoints lying
//! on other segments), vertices closer than the tolerance are merged, and
//! the bounded faces are traced with their holes.

use std::collections::{BTreeSet, HashMap};

use crate::geom::{interior_point, point_segment_distance, ring_contains, signed_area, Point2, Segment2};

#[derive(Clone, Debug)]
pub struct ArrFace {
    /// Outer boundary, counter-clockwise, as a half-edge cycle.
    pub outer: Vec<usize>,
    /// Boundaries of components nested in this face (clockwise).
    pub holes: Vec<Vec<usize>>,
    pub area: f64,
}

#[derive(Clone, Debug)]
pub struct Arrangement {
    pub vertices: Vec<Point2<f64>>,
    /// Undirected edges `(u, v)` with `u < v`. Half-edge `2k` runs `u → v`,
    /// `2k + 1` runs `v → u`.
    pub edges: Vec<(usize, usize)>,
    next: Vec<usize>,
    face_of: Vec<Option<usize>>,
    pub faces: Vec<ArrFace>,
    pub tolerance: f64,
}

struct VertexRegistry {
    cell: f64,
    grid: HashMap<(i64, i64), Vec<usize>>,
    points: Vec<Point2<f64>>,
    tol: f64,
}

impl VertexRegistry {
    fn new(tol: f64) -> Self {
        Self { cell: tol.max(1e-300) * 2.0, grid: HashMap::new(), points: Vec::new(), tol }
    }

    fn key(&self, p: Point2<f64>) -> (i64, i64) {
        ((p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: Point2<f64>) -> usize {
        let (kx, ky) = self.key(p);
        let mut best: Option<(f64, usize)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.grid.get(&(kx + dx, ky + dy)) {
                    for &id in ids {
                        let d = self.points[id].dist(p);
                        if d <= self.tol && best.is_none_or(|(bd, _)| d < bd) {
                            best = Some((d, id));
                        }
                    }
                }
            }
        }
        if let Some((_, id)) = best {
            return id;
        }
        let id = self.points.len();
        self.points.push(p);
        self.grid.entry((kx, ky)).or_default().push(id);
        id
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl Arrangement {
    /// Builds the arrangement of `segments`. Segments shorter than `tol`
    /// are ignored.
    pub fn build(segments: &[Segment2<f64>], tol: f64) -> Arrangement {
        let segs: Vec<Segment2<f64>> = segments.iter().copied().filter(|s| s.length() > tol).collect();
        let mut reg = VertexRegistry::new(tol);
        let mut splits: Vec<Vec<(f64, usize)>> = segs
            .iter()
            .map(|s| {
                let a = reg.insert(s.a);
                let b = reg.insert(s.b);
                vec![(0.0, a), (1.0, b)]
            })
            .collect();

        let bbox = |s: &Segment2<f64>| {
            (
                Point2::new(s.a.x.min(s.b.x) - tol, s.a.y.min(s.b.y) - tol),
                Point2::new(s.a.x.max(s.b.x) + tol, s.a.y.max(s.b.y) + tol),
            )
        };
        let boxes: Vec<_> = segs.iter().map(bbox).collect();
        let param = |s: &Segment2<f64>, p: Point2<f64>| {
            let r = s.vector();
            ((p - s.a).dot(r) / r.norm2()).clamp(0.0, 1.0)
        };

        for i in 0..segs.len() {
            for j in i + 1..segs.len() {
                let (lo_i, hi_i) = boxes[i];
                let (lo_j, hi_j) = boxes[j];
                if lo_i.x > hi_j.x || lo_j.x > hi_i.x || lo_i.y > hi_j.y || lo_j.y > hi_i.y {
                    continue;
                }
                let (si, sj) = (segs[i], segs[j]);
                // Endpoints of one segment lying on the other.
                for (k, e) in [(0, sj.a), (1, sj.b)] {
                    if point_segment_distance(e, si.a, si.b) <= tol {
                        let id = splits[j][k].1;
                        splits[i].push((param(&si, e), id));
                    }
                }
                for (k, e) in [(0, si.a), (1, si.b)] {
                    if point_segment_distance(e, sj.a, sj.b) <= tol {
                        let id = splits[i][k].1;
                        splits[j].push((param(&sj, e), id));
                    }
                }
                let (r, s) = (si.vector(), sj.vector());
                let denom = r.cross(s);
                if denom.abs() <= 1e-12 * r.norm() * s.norm() {
                    continue;
                }
                let qp = sj.a - si.a;
                let t = qp.cross(s) / denom;
                let u = qp.cross(r) / denom;
                let (et, eu) = (tol / r.norm(), tol / s.norm());
                if t < -et || t > 1.0 + et || u < -eu || u > 1.0 + eu {
                    continue;
                }
                let (t, u) = (t.clamp(0.0, 1.0), u.clamp(0.0, 1.0));
                let id = reg.insert(si.at(t));
                splits[i].push((t, id));
                splits[j].push((u, id));
            }
        }

        let mut edge_set = BTreeSet::new();
        for list in &mut splits {
            list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for w in list.windows(2) {
                let (u, v) = (w[0].1, w[1].1);
                if u != v {
                    edge_set.insert((u.min(v), u.max(v)));
                }
            }
        }
        Self::from_graph(reg.points, edge_set.into_iter().collect(), tol)
    }

    fn from_graph(vertices: Vec<Point2<f64>>, edges: Vec<(usize, usize)>, tol: f64) -> Arrangement {
        let nh = edges.len() * 2;
        let origin = |h: usize| if h % 2 == 0 { edges[h / 2].0 } else { edges[h / 2].1 };
        let target = |h: usize| origin(h ^ 1);
        let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
        for h in 0..nh {
            outgoing[origin(h)].push(h);
        }
        let mut pos = vec![0usize; nh];
        for list in &mut outgoing {
            list.sort_by(|&a, &b| {
                let da = vertices[target(a)] - vertices[origin(a)];
                let db = vertices[target(b)] - vertices[origin(b)];
                da.y.atan2(da.x).total_cmp(&db.y.atan2(db.x)).then(a.cmp(&b))
            });
            for (i, &h) in list.iter().enumerate() {
                pos[h] = i;
            }
        }
        let mut next = vec![0usize; nh];
        for h in 0..nh {
            let tw = h ^ 1;
            let list = &outgoing[origin(tw)];
            next[h] = list[(pos[tw] + list.len() - 1) % list.len()];
        }

        // Trace cycles.
        let mut cycle_of = vec![usize::MAX; nh];
        let mut cycles: Vec<Vec<usize>> = Vec::new();
        for h0 in 0..nh {
            if cycle_of[h0] != usize::MAX {
                continue;
            }
            let mut cyc = Vec::new();
            let mut h = h0;
            loop {
                cycle_of[h] = cycles.len();
                cyc.push(h);
                h = next[h];
                if h == h0 {
                    break;
                }
            }
            cycles.push(cyc);
        }
        let ring_pts = |c: &[usize]| c.iter().map(|&h| vertices[origin(h)]).collect::<Vec<_>>();
        let areas: Vec<f64> = cycles.iter().map(|c| signed_area(&ring_pts(c))).collect();

        let mut parent: Vec<usize> = (0..vertices.len()).collect();
        for &(u, v) in &edges {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            parent[a.max(b)] = a.min(b);
        }
        let comp: Vec<usize> = (0..vertices.len()).map(|v| find(&mut parent, v)).collect();

        let mut faces = Vec::new();
        let mut face_of_cycle = vec![None; cycles.len()];
        // A cycle is a bounded face if it winds positively; the tolerance
        // guards against collapsed slivers from vertex merging.
        let area_eps = tol * tol;
        for (ci, c) in cycles.iter().enumerate() {
            if areas[ci] > area_eps {
                face_of_cycle[ci] = Some(faces.len());
                faces.push(ArrFace { outer: c.clone(), holes: Vec::new(), area: areas[ci] });
            }
        }
        for (ci, c) in cycles.iter().enumerate() {
            if face_of_cycle[ci].is_some() {
                continue;
            }
            let v0 = origin(c[0]);
            let p = vertices[v0];
            let mut best: Option<(f64, usize)> = None;
            for (fi, f) in faces.iter().enumerate() {
                if comp[origin(f.outer[0])] == comp[v0] {
                    continue;
                }
                if best.is_some_and(|(a, _)| f.area >= a) {
                    continue;
                }
                if ring_contains(&ring_pts(&f.outer), p) {
                    best = Some((f.area, fi));
                }
            }
            if let Some((_, fi)) = best {
                face_of_cycle[ci] = Some(fi);
                faces[fi].holes.push(c.clone());
                faces[fi].area += areas[ci];
            }
        }
        let face_of = (0..nh).map(|h| face_of_cycle[cycle_of[h]]).collect();
        Arrangement { vertices, edges, next, face_of, faces, tolerance: tol }
    }

    pub fn half_edge_count(&self) -> usize {
        self.edges.len() * 2
    }

    pub fn origin(&self, h: usize) -> usize {
        let (u, v) = self.edges[h / 2];
        if h % 2 == 0 {
            u
        } else {
            v
        }
    }

    pub fn target(&self, h: usize) -> usize {
        self.origin(h ^ 1)
    }

    pub fn next(&self, h: usize) -> usize {
        self.next[h]
    }

    /// Bounded face to the left of `h`, `None` for the unbounded face.
    pub fn face(&self, h: usize) -> Option<usize> {
        self.face_of[h]
    }

    pub fn half_edge_length(&self, h: usize) -> f64 {
        self.vertices[self.origin(h)].dist(self.vertices[self.target(h)])
    }

    pub fn cycle_points(&self, cycle: &[usize]) -> Vec<Point2<f64>> {
        cycle.iter().map(|&h| self.vertices[self.origin(h)]).collect()
    }

    pub fn face_rings(&self, f: usize) -> Vec<Vec<Point2<f64>>> {
        let face = &self.faces[f];
        std::iter::once(&face.outer).chain(&face.holes).map(|c| self.cycle_points(c)).collect()
    }

    pub fn face_interior_point(&self, f: usize) -> Option<Point2<f64>> {
        interior_point(&self.face_rings(f))
    }

    /// Boundary rings (vertex indices) of the region formed by all faces
    /// with `inside(face) == true`. Outer rings run counter-clockwise,
    /// holes clockwise.
    pub fn region_boundary(&self, inside: impl Fn(Option<usize>) -> bool) -> Vec<Vec<usize>> {
        let nh = self.half_edge_count();
        let is_boundary = |h: usize| inside(self.face(h)) && !inside(self.face(h ^ 1));
        let mut seen = vec![false; nh];
        let mut rings = Vec::new();
        for h0 in 0..nh {
            if seen[h0] || !is_boundary(h0) {
                continue;
            }
            let mut ring = Vec::new();
            let mut h = h0;
            loop {
                seen[h] = true;
                ring.push(self.origin(h));
                let mut c = self.next(h);
                // Rotate around the vertex past half-edges interior to the region.
                let mut guard = 0;
                while !is_boundary(c) {
                    c = self.next(c ^ 1);
                    guard += 1;
                    if guard > nh {
                        break;
                    }
                }
                h = c;
                if h == h0 || seen[h] {
                    break;
                }
            }
            rings.push(ring);
        }
        rings
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(ax: f64, ay: f64, bx: f64, by: f64) -> Segment2<f64> {
        Segment2::new(Point2::new(ax, ay), Point2::new(bx, by))
    }

    fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Segment2<f64>> {
        vec![seg(x0, y0, x1, y0), seg(x1, y0, x1, y1), seg(x1, y1, x0, y1), seg(x0, y1, x0, y0)]
    }

    #[test]
    fn square_is_one_face() {
        let a = Arrangement::build(&square(0.0, 0.0, 2.0, 2.0), 1e-9);
        assert_eq!(a.faces.len(), 1);
        assert!((a.faces[0].area - 4.0).abs() < 1e-12);
    }

    #[test]
    fn plus_inside_square() {
        let mut s = square(0.0, 0.0, 2.0, 2.0);
        s.push(seg(1.0, 0.0, 1.0, 2.0));
        s.push(seg(0.0, 1.0, 2.0, 1.0));
        let a = Arrangement::build(&s, 1e-9);
        assert_eq!(a.faces.len(), 4);
        for f in &a.faces {
            assert!((f.area - 1.0).abs() < 1e-12);
        }
        assert_eq!(a.vertices.len(), 9);
    }

    #[test]
    fn dangling_edge_does_not_split() {
        let mut s = square(0.0, 0.0, 2.0, 2.0);
        s.push(seg(0.0, 1.0, 1.0, 1.0));
        let a = Arrangement::build(&s, 1e-9);
        assert_eq!(a.faces.len(), 1);
        assert!((a.faces[0].area - 4.0).abs() < 1e-12);
    }

    #[test]
    fn nested_square_becomes_hole() {
        let mut s = square(0.0, 0.0, 4.0, 4.0);
        s.extend(square(1.0, 1.0, 2.0, 2.0));
        let a = Arrangement::build(&s, 1e-9);
        assert_eq!(a.faces.len(), 2);
        let big = a.faces.iter().find(|f| f.holes.len() == 1).unwrap();
        assert!((big.area - 15.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_overlap_is_shared() {
        let mut s = square(0.0, 0.0, 2.0, 2.0);
        s.push(seg(-1.0, 0.0, 1.0, 0.0));
        let a = Arrangement::build(&s, 1e-9);
        assert_eq!(a.faces.len(), 1);
        assert!((a.faces[0].area - 4.0).abs() < 1e-12);
    }

    #[test]
    fn region_boundary_of_union() {
        let mut s = square(0.0, 0.0, 2.0, 2.0);
        s.push(seg(1.0, 0.0, 1.0, 2.0));
        let a = Arrangement::build(&s, 1e-9);
        let rings = a.region_boundary(|f| f.is_some());
        assert_eq!(rings.len(), 1);
        let pts: Vec<_> = rings[0].iter().map(|&v| a.vertices[v]).collect();
        assert!((signed_area(&pts) - 4.0).abs() < 1e-12);
        assert_eq!(pts.len(), 6);
    }
}
