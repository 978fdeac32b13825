use super::footprint::{validate_polygon, Footprint};
use crate::geom::{buffer_polygon, point_segment_distance, union_all, union_pair, Point2, Polygon2};
use crate::{Error, Result};

fn segment_distance(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>, d: Point2<f64>) -> f64 {
    let r = b - a;
    let s = d - c;
    let denom = r.cross(s);
    if denom != 0.0 {
        let t = (c - a).cross(s) / denom;
        let u = (c - a).cross(r) / denom;
        if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
            return 0.0;
        }
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

fn polygon_distance(p: &Polygon2<f64>, q: &Polygon2<f64>) -> f64 {
    if p.contains(q.outer[0]) || q.contains(p.outer[0]) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for e in p.edges() {
        for f in q.edges() {
            best = best.min(segment_distance(e.a, e.b, f.a, f.b));
            if best == 0.0 {
                return 0.0;
            }
        }
    }
    best
}

fn bbox_gap(p: &Polygon2<f64>, q: &Polygon2<f64>) -> f64 {
    let (a0, a1) = p.bbox();
    let (b0, b1) = q.bbox();
    let dx = (b0.x - a1.x).max(a0.x - b1.x).max(0.0);
    let dy = (b0.y - a1.y).max(a0.y - b1.y).max(0.0);
    dx.hypot(dy)
}

fn find(parent: &mut [usize], i: usize) -> usize {
    let mut r = i;
    while parent[r] != r {
        r = parent[r];
    }
    let mut j = i;
    while parent[j] != r {
        let next = parent[j];
        parent[j] = r;
        j = next;
    }
    r
}

/// Unions footprints that share boundary (or lie within `gap_tolerance`),
/// transitively. Merged ids are the sorted member ids joined by `+`; output
/// order follows the first member of each group.
///
/// With a zero tolerance two footprints are adjacent when their union is a
/// single polygon, so corner-only contacts stay separate. With a positive
/// tolerance, groups whose exact union is disconnected are bridged by
/// dilating the members by half the tolerance, and passes repeat until a
/// bridged group no longer pulls in a new neighbour.
pub fn merge_adjacent_footprints(footprints: &[Footprint], gap_tolerance: f64) -> Result<Vec<Footprint>> {
    if !(gap_tolerance >= 0.0) {
        return Err(Error::Geometry(format!("gap tolerance must be >= 0, got {gap_tolerance}")));
    }
    let mut current: Vec<(Vec<String>, Footprint)> =
        footprints.iter().map(|f| (vec![f.id.clone()], f.clone())).collect();
    loop {
        let next = merge_pass(&current, gap_tolerance)?;
        let settled = next.len() == current.len();
        current = next;
        if settled {
            return Ok(current.into_iter().map(|(_, f)| f).collect());
        }
    }
}

fn merge_pass(items: &[(Vec<String>, Footprint)], gap_tolerance: f64) -> Result<Vec<(Vec<String>, Footprint)>> {
    let footprints: Vec<&Footprint> = items.iter().map(|(_, f)| f).collect();
    let n = footprints.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            let (p, q) = (&footprints[i].polygon, &footprints[j].polygon);
            if bbox_gap(p, q) > gap_tolerance {
                continue;
            }
            let adjacent = if gap_tolerance == 0.0 {
                polygon_distance(p, q) == 0.0 && union_pair(p, q).len() == 1
            } else {
                polygon_distance(p, q) <= gap_tolerance
            };
            if adjacent {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|(root, _)| *root == r) {
            Some((_, members)) => members.push(i),
            None => groups.push((r, vec![i])),
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for (_, members) in groups {
        if members.len() == 1 {
            out.push(items[members[0]].clone());
            continue;
        }
        let mut ids: Vec<String> = members.iter().flat_map(|&i| items[i].0.iter().cloned()).collect();
        ids.sort_unstable();
        let id = ids.join("+");
        let polys: Vec<Polygon2<f64>> = members.iter().map(|&i| footprints[i].polygon.clone()).collect();
        let mut parts = union_all(&polys);
        if parts.len() > 1 && gap_tolerance > 0.0 {
            let grown = polys
                .iter()
                .map(|p| buffer_polygon(p, gap_tolerance / 2.0, 4))
                .collect::<Result<Vec<_>>>()?;
            parts = union_all(&grown);
        }
        if parts.len() != 1 {
            return Err(Error::Geometry(format!("union of {id} is not a single polygon")));
        }
        let polygon = parts.pop().unwrap();
        validate_polygon(&polygon).map_err(|r| Error::Geometry(format!("union of {id}: {r}")))?;
        out.push((ids, Footprint { id, polygon }));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(id: &str, x: f64, y: f64, s: f64) -> Footprint {
        Footprint::new(
            id,
            vec![
                Point2::new(x, y),
                Point2::new(x + s, y),
                Point2::new(x + s, y + s),
                Point2::new(x, y + s),
            ],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn disjoint_squares_unchanged() {
        let fps = vec![square("a", 0.0, 0.0, 1.0), square("b", 11.0, 0.0, 1.0)];
        let out = merge_adjacent_footprints(&fps, 0.01).unwrap();
        assert_eq!(out, fps);
    }

    #[test]
    fn shared_edge_merges() {
        let fps = vec![square("a", 0.0, 0.0, 1.0), square("b", 1.0, 0.0, 1.0)];
        let out = merge_adjacent_footprints(&fps, 0.0).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0].area() - 2.0).abs() < 1e-12);
        assert_eq!(out[0].id, "a+b");
    }

    #[test]
    fn transitive_row_sorted_ids() {
        let fps = vec![
            square("c", 2.0, 0.0, 1.0),
            square("a", 0.0, 0.0, 1.0),
            square("b", 1.0, 0.0, 1.0),
        ];
        let out = merge_adjacent_footprints(&fps, 0.0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].id, "a+b+c");
        assert!((out[0].area() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn corner_contact_is_not_adjacency() {
        let fps = vec![square("a", 0.0, 0.0, 1.0), square("b", 1.0, 1.0, 1.0)];
        assert_eq!(merge_adjacent_footprints(&fps, 0.0).unwrap().len(), 2);
    }

    #[test]
    fn gap_within_tolerance_is_bridged() {
        let fps = vec![square("a", 0.0, 0.0, 1.0), square("b", 1.05, 0.0, 1.0)];
        let out = merge_adjacent_footprints(&fps, 0.1).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].area() >= 2.0);
    }
}
