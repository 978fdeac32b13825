//! Kinetic extension of segments: both ends of every segment grow at unit
//! speed along the supporting line until they hit the region boundary or
//! have run into other segments more than `K` times.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arrangement::Arrangement;
use crate::geom::{Point2, Polygon2, Segment2};
use crate::linedetect::PixelSegment;
use crate::{Error, Result};

/// Rays closer than this to parallel never collide.
const PARALLEL_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Obstacle {
    Segment(usize),
    Boundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    Boundary,
    Collision,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KineticEvent {
    pub time: f64,
    pub ray_id: usize,
    pub obstacle: Obstacle,
    pub point: Point2<f64>,
}

impl Eq for KineticEvent {}

impl Ord for KineticEvent {
    // Reversed so that `BinaryHeap` pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.ray_id.cmp(&self.ray_id))
            .then(other.obstacle.cmp(&self.obstacle))
    }
}

impl PartialOrd for KineticEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendedSegment {
    pub origin: usize,
    pub p0: Point2<f64>,
    pub p1: Point2<f64>,
    pub stop_reasons: [StopReason; 2],
    pub crossings: [usize; 2],
    pub width: f64,
    pub score: f64,
}

impl ExtendedSegment {
    pub fn segment(&self) -> Segment2<f64> {
        Segment2::new(self.p0, self.p1)
    }

    pub fn to_pixel_segment(&self) -> PixelSegment {
        PixelSegment { p0: self.p0, p1: self.p1, width: self.width, score: self.score }
    }
}

/// Line `n · x = c` with unit normal.
#[derive(Clone, Copy)]
struct Line {
    n: Point2<f64>,
    c: f64,
}

impl Line {
    fn through(p: Point2<f64>, d: Point2<f64>) -> Line {
        let n = d.perp();
        Line { n, c: n.dot(p) }
    }

    fn intersect(&self, o: &Line) -> Point2<f64> {
        let det = self.n.x * o.n.y - self.n.y * o.n.x;
        Point2::new((self.c * o.n.y - self.n.y * o.c) / det, (self.n.x * o.c - self.c * o.n.x) / det)
    }
}

struct Ray {
    start: Point2<f64>,
    dir: Point2<f64>,
    line: Line,
    exit_time: f64,
    exit_point: Point2<f64>,
    active: bool,
    stop_time: f64,
    stop_point: Point2<f64>,
    reason: StopReason,
    crossings: usize,
}

/// First time the ray leaves `region`, with the exit point.
fn boundary_exit(start: Point2<f64>, dir: Point2<f64>, line: &Line, region: &Polygon2<f64>, scale: f64) -> (f64, Point2<f64>) {
    if !region.contains_with_tol(start, 1e-9 * scale) {
        return (0.0, start);
    }
    let mut hits: Vec<(f64, Point2<f64>)> = Vec::new();
    for e in region.edges() {
        let ev = e.vector();
        let el = ev.norm();
        if el == 0.0 || dir.cross(ev / el).abs() < PARALLEL_EPS {
            continue;
        }
        let (t, u) = {
            let denom = dir.cross(ev);
            let qp = e.a - start;
            (qp.cross(ev) / denom, qp.cross(dir) / denom)
        };
        if u < -1e-12 || u > 1.0 + 1e-12 || t < -1e-9 * scale {
            continue;
        }
        let x = line.intersect(&Line::through(e.a, ev / el));
        hits.push((t.max(0.0), x));
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));
    let probe = 1e-7 * scale;
    for &(t, x) in &hits {
        if !region.contains(start + dir * (t + probe)) {
            return (((x - start).dot(dir)).max(0.0), x);
        }
    }
    // Numerically the ray never left; use the farthest hit.
    hits.last().map(|&(t, x)| (t, x)).unwrap_or((0.0, start))
}

/// Extends `segments` inside `region`. `max_crossings = None` lets rays
/// cross any number of segments.
pub fn extend_segments(
    segments: &[PixelSegment],
    region: &Polygon2<f64>,
    max_crossings: Option<usize>,
) -> Vec<ExtendedSegment> {
    let (lo, hi) = region.bbox();
    let scale = (hi - lo).norm().max(1.0);
    let tol = 1e-9 * scale;

    let live: Vec<bool> = segments.iter().map(|s| s.length() > tol).collect();
    let dirs: Vec<Point2<f64>> = segments.iter().map(|s| if s.length() > 0.0 { (s.p1 - s.p0) / s.length() } else { Point2::new(1.0, 0.0) }).collect();
    let lines: Vec<Line> = segments.iter().zip(&dirs).map(|(s, &d)| Line::through(s.p0, d)).collect();

    let mut rays: Vec<Ray> = Vec::with_capacity(segments.len() * 2);
    for (i, s) in segments.iter().enumerate() {
        for (start, dir) in [(s.p0, -dirs[i]), (s.p1, dirs[i])] {
            let line = lines[i];
            let (exit_time, exit_point) = if live[i] { boundary_exit(start, dir, &line, region, scale) } else { (0.0, start) };
            rays.push(Ray {
                start,
                dir,
                line,
                exit_time,
                exit_point,
                active: live[i],
                stop_time: 0.0,
                stop_point: start,
                reason: StopReason::Boundary,
                crossings: 0,
            });
        }
    }

    let mut heap = BinaryHeap::new();
    for (r, ray) in rays.iter().enumerate() {
        if !ray.active {
            continue;
        }
        let i = r / 2;
        heap.push(KineticEvent { time: ray.exit_time, ray_id: r, obstacle: Obstacle::Boundary, point: ray.exit_point });
        for j in 0..segments.len() {
            if j == i || !live[j] || ray.dir.cross(dirs[j]).abs() < PARALLEL_EPS {
                continue;
            }
            let x = ray.line.intersect(&lines[j]);
            let t = (x - ray.start).dot(ray.dir);
            if t < -tol || t > ray.exit_time {
                continue;
            }
            heap.push(KineticEvent { time: t.max(0.0), ray_id: r, obstacle: Obstacle::Segment(j), point: x });
        }
    }

    while let Some(ev) = heap.pop() {
        let r = ev.ray_id;
        if !rays[r].active {
            continue;
        }
        let stop = match ev.obstacle {
            Obstacle::Boundary => Some(StopReason::Boundary),
            Obstacle::Segment(j) => {
                let s = (ev.point - segments[j].p0).dot(dirs[j]);
                let len = segments[j].length();
                let present = if s >= -tol && s <= len + tol {
                    true
                } else {
                    let (ray_j, dist) = if s < 0.0 { (2 * j, -s) } else { (2 * j + 1, s - len) };
                    let other = &rays[ray_j];
                    let extent = if other.active { ev.time } else { other.stop_time };
                    dist <= extent + tol
                };
                if present {
                    rays[r].crossings += 1;
                    match max_crossings {
                        Some(k) if rays[r].crossings > k => Some(StopReason::Collision),
                        _ => None,
                    }
                } else {
                    None
                }
            }
        };
        if let Some(reason) = stop {
            let ray = &mut rays[r];
            ray.active = false;
            ray.stop_time = ev.time;
            ray.stop_point = ev.point;
            ray.reason = reason;
            if reason == StopReason::Collision {
                // The stopping encounter is not a crossing.
                ray.crossings -= 1;
            }
        }
    }

    segments
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (a, b) = (&rays[2 * i], &rays[2 * i + 1]);
            ExtendedSegment {
                origin: i,
                p0: a.stop_point,
                p1: b.stop_point,
                stop_reasons: [a.reason, b.reason],
                crossings: [a.crossings, b.crossings],
                width: s.width,
                score: s.score,
            }
        })
        .collect()
}

/// Planar partition of `region` induced by the extended segments.
pub fn partition_region(extended: &[ExtendedSegment], region: &Polygon2<f64>) -> Arrangement {
    let (lo, hi) = region.bbox();
    let tol = 1e-7 * (hi - lo).norm().max(1.0);
    let mut segs: Vec<Segment2<f64>> = region.edges().collect();
    segs.extend(extended.iter().map(|e| e.segment()));
    Arrangement::build(&segs, tol)
}

pub fn face_count(extended: &[ExtendedSegment], region: &Polygon2<f64>) -> usize {
    partition_region(extended, region).faces.len()
}

pub fn rectangle(width: f64, height: f64) -> Polygon2<f64> {
    Polygon2::new(
        vec![Point2::new(0.0, 0.0), Point2::new(width, 0.0), Point2::new(width, height), Point2::new(0.0, height)],
        vec![],
    )
}

pub fn extended_csv(extended: &[ExtendedSegment]) -> String {
    let mut s = String::from("origin,x0,y0,x1,y1,stop0,stop1\n");
    for e in extended {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{:?},{:?}",
            e.origin, e.p0.x, e.p0.y, e.p1.x, e.p1.y, e.stop_reasons[0], e.stop_reasons[1]
        );
    }
    s
}

/// SVG overlay: extended segments in red over the originals in black.
pub fn extended_svg(original: &[PixelSegment], extended: &[ExtendedSegment], width: f64, height: f64) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n"
    );
    s.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for e in extended {
        let _ = writeln!(
            s,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"red\" stroke-width=\"1\"/>",
            e.p0.x, e.p0.y, e.p1.x, e.p1.y
        );
    }
    for o in original {
        let _ = writeln!(
            s,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\" stroke-width=\"2\"/>",
            o.p0.x, o.p0.y, o.p1.x, o.p1.y
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_debug(dir: &Path, id: &str, original: &[PixelSegment], extended: &[ExtendedSegment], w: f64, h: f64) -> Result<()> {
    let csv = dir.join(format!("{id}.extended.csv"));
    std::fs::write(&csv, extended_csv(extended)).map_err(|e| Error::io(&csv, e))?;
    let svg = dir.join(format!("{id}.extended.svg"));
    std::fs::write(&svg, extended_svg(original, extended, w, h)).map_err(|e| Error::io(&svg, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(ax: f64, ay: f64, bx: f64, by: f64) -> PixelSegment {
        PixelSegment::new(Point2::new(ax, ay), Point2::new(bx, by))
    }

    #[test]
    fn empty_input() {
        let region = rectangle(10.0, 10.0);
        let out = extend_segments(&[], &region, Some(1));
        assert!(out.is_empty());
        assert_eq!(face_count(&out, &region), 1);
    }

    #[test]
    fn single_segment_reaches_both_walls() {
        let region = rectangle(100.0, 100.0);
        for k in [Some(0), Some(3), None] {
            let out = extend_segments(&[ps(40.0, 50.0, 60.0, 50.0)], &region, k);
            assert_eq!(out[0].p0, Point2::new(0.0, 50.0));
            assert_eq!(out[0].p1, Point2::new(100.0, 50.0));
            assert_eq!(out[0].stop_reasons, [StopReason::Boundary; 2]);
            assert_eq!(face_count(&out, &region), 2);
        }
    }

    #[test]
    fn plus_gives_four_faces() {
        let region = rectangle(100.0, 100.0);
        let s = [ps(40.0, 50.0, 60.0, 50.0), ps(50.0, 40.0, 50.0, 60.0)];
        for k in [Some(0), Some(1), None] {
            let out = extend_segments(&s, &region, k);
            assert_eq!(face_count(&out, &region), 4, "K = {k:?}");
        }
    }

    #[test]
    fn t_junction_with_zero_crossings() {
        let region = rectangle(100.0, 100.0);
        // A long wall and a short stub pointing at it.
        let s = [ps(10.0, 50.0, 90.0, 50.0), ps(50.0, 60.0, 50.0, 80.0)];
        let out = extend_segments(&s, &region, Some(0));
        assert_eq!(out[1].p0, Point2::new(50.0, 50.0));
        assert_eq!(out[1].stop_reasons[0], StopReason::Collision);
        assert_eq!(out[1].p1, Point2::new(50.0, 100.0));
        assert_eq!(face_count(&out, &region), 3);
        let out = extend_segments(&s, &region, Some(1));
        assert_eq!(out[1].p0, Point2::new(50.0, 0.0));
        assert_eq!(out[1].crossings[0], 1);
        assert_eq!(face_count(&out, &region), 4);
    }

    #[test]
    fn contains_original() {
        let region = rectangle(100.0, 100.0);
        let s = [ps(20.0, 20.0, 40.0, 30.0), ps(60.0, 10.0, 55.0, 70.0), ps(10.0, 80.0, 90.0, 85.0)];
        for k in [Some(0), Some(1), None] {
            for e in extend_segments(&s, &region, k) {
                let o = s[e.origin];
                let seg = e.segment();
                assert!(seg.distance_to(o.p0) < 1e-9 && seg.distance_to(o.p1) < 1e-9);
            }
        }
    }
}
