//! Global segment regularization: shared orientations (parallel and
//! perpendicular) and shared supporting lines (collinear).
//!
//! Orientation values are grouped by an exact 1D partition: every member
//! lies within the radius of its group's length-weighted mean, consecutive
//! group means are more than the radius apart, and among such partitions
//! the one with the most groups (then the least weighted squared spread)
//! wins. Output groups are then fixed points of the same partition, which
//! makes the whole pass idempotent.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::geom::Point2;
use crate::linedetect::PixelSegment;

/// Rotations below this are treated as already snapped.
const ANGLE_EPS: f64 = 1e-12;
/// Offset differences below this are treated as already on the line.
const OFFSET_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationCluster {
    /// Frame angle in `[0, π)`; members are parallel to it or to it plus π/2.
    pub representative_angle: f64,
    pub members: Vec<usize>,
    pub total_length: f64,
}

/// Largest rotation about the midpoint whose endpoint chord stays within
/// `(len / 2) · sin(theta_par)`.
pub fn rotation_radius(theta_par: f64) -> f64 {
    2.0 * (theta_par.sin() / 2.0).asin()
}

#[derive(Clone, Copy)]
struct Group {
    start: usize,
    end: usize,
    mean: f64,
}

/// Exact partition of sorted `values` into contiguous groups (see module
/// docs). Returns `None` when no partition satisfies both constraints.
fn partition_sorted(values: &[f64], weights: &[f64], r: f64) -> Option<Vec<Group>> {
    let n = values.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let base = values[0];
    let mut sw = vec![0.0; n + 1];
    let mut swv = vec![0.0; n + 1];
    let mut swv2 = vec![0.0; n + 1];
    for i in 0..n {
        let v = values[i] - base;
        sw[i + 1] = sw[i] + weights[i];
        swv[i + 1] = swv[i] + weights[i] * v;
        swv2[i + 1] = swv2[i] + weights[i] * v * v;
    }
    struct State {
        start: usize,
        mean: f64,
        groups: usize,
        cost: f64,
        parent: Option<usize>,
    }
    let mut states: Vec<State> = Vec::new();
    let mut ending_at: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for j in 1..=n {
        let mut i = j;
        while i > 0 && values[j - 1] - values[i - 1] <= 2.0 * r {
            i -= 1;
            let w = sw[j] - sw[i];
            let s = swv[j] - swv[i];
            let mean = base + s / w;
            if mean - values[i] > r || values[j - 1] - mean > r {
                continue;
            }
            let cost = (swv2[j] - swv2[i] - s * s / w).max(0.0);
            let mut best: Option<(usize, f64, Option<usize>)> = if i == 0 { Some((1, cost, None)) } else { None };
            for &p in &ending_at[i] {
                let st = &states[p];
                if !(mean - st.mean > r) {
                    continue;
                }
                let cand = (st.groups + 1, st.cost + cost, Some(p));
                if best.is_none_or(|b| cand.0 > b.0 || (cand.0 == b.0 && cand.1 < b.1)) {
                    best = Some(cand);
                }
            }
            if let Some((groups, cost, parent)) = best {
                ending_at[j].push(states.len());
                states.push(State { start: i, mean, groups, cost, parent });
            }
        }
    }
    let mut best: Option<usize> = None;
    for &p in &ending_at[n] {
        let st = &states[p];
        if best.is_none_or(|b| {
            let bs = &states[b];
            st.groups > bs.groups || (st.groups == bs.groups && st.cost < bs.cost)
        }) {
            best = Some(p);
        }
    }
    let mut out = Vec::new();
    let mut cur = best;
    let mut end = n;
    while let Some(p) = cur {
        let st = &states[p];
        out.push(Group { start: st.start, end, mean: 0.0 });
        end = st.start;
        cur = st.parent;
    }
    out.reverse();
    for g in &mut out {
        g.mean = weighted_mean(&values[g.start..g.end], &weights[g.start..g.end]);
    }
    Some(out)
}

fn weighted_mean(values: &[f64], weights: &[f64]) -> f64 {
    let w: f64 = weights.iter().sum();
    values.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>() / w
}

/// Greedy fallback: heaviest first, join the first group whose running mean
/// is within `r`.
fn greedy_groups(values: &[f64], weights: &[f64], r: f64, period: Option<f64>) -> Vec<(Vec<usize>, f64)> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let dist = |a: f64, b: f64| match period {
        Some(p) => {
            let d = (a - b).rem_euclid(p);
            d.min(p - d)
        }
        None => (a - b).abs(),
    };
    let mut groups: Vec<(Vec<usize>, f64, f64)> = Vec::new();
    for i in order {
        match groups.iter_mut().find(|g| dist(values[i], g.1) <= r) {
            Some(g) => {
                // Unwrap the value next to the current mean before averaging.
                let mut v = values[i];
                if let Some(p) = period {
                    v = g.1 + ((v - g.1 + p / 2.0).rem_euclid(p) - p / 2.0);
                }
                g.1 = (g.1 * g.2 + v * weights[i]) / (g.2 + weights[i]);
                g.2 += weights[i];
                g.0.push(i);
            }
            None => groups.push((vec![i], values[i], weights[i])),
        }
    }
    groups.into_iter().map(|(m, mean, _)| (m, mean)).collect()
}

/// Groups linear values; returns (member indices, mean) per group.
fn group_linear(values: &[f64], weights: &[f64], r: f64) -> Vec<(Vec<usize>, f64)> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let sv: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let sw: Vec<f64> = order.iter().map(|&i| weights[i]).collect();
    match partition_sorted(&sv, &sw, r) {
        Some(groups) => groups.iter().map(|g| (order[g.start..g.end].to_vec(), g.mean)).collect(),
        None => greedy_groups(values, weights, r, None),
    }
}

/// Groups values on a circle of circumference `period`.
fn group_circular(values: &[f64], weights: &[f64], r: f64, period: f64) -> Vec<(Vec<usize>, f64)> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let sv: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    // gaps[k] is the gap after sorted position k (the last one wraps).
    let gaps: Vec<f64> =
        (0..n).map(|k| if k + 1 < n { sv[k + 1] - sv[k] } else { sv[0] + period - sv[n - 1] }).collect();
    let mut cuts: Vec<usize> = (0..n).collect();
    cuts.sort_by(|&a, &b| gaps[b].total_cmp(&gaps[a]).then(a.cmp(&b)));

    let mut best: Option<(usize, f64, Vec<(Vec<usize>, f64)>)> = None;
    for &k in &cuts {
        let start = (k + 1) % n;
        let idx: Vec<usize> = (0..n).map(|m| (start + m) % n).collect();
        let uv: Vec<f64> = idx.iter().map(|&m| if m >= start { sv[m] } else { sv[m] + period }).collect();
        let uw: Vec<f64> = idx.iter().map(|&m| weights[order[m]]).collect();
        let Some(groups) = partition_sorted(&uv, &uw, r) else { continue };
        if groups.len() > 1 {
            let wrap = groups[0].mean + period - groups[groups.len() - 1].mean;
            if !(wrap > r) {
                continue;
            }
        }
        let cost: f64 = groups
            .iter()
            .map(|g| (g.start..g.end).map(|m| uw[m] * (uv[m] - g.mean).powi(2)).sum::<f64>())
            .sum();
        let res: Vec<(Vec<usize>, f64)> =
            groups.iter().map(|g| (idx[g.start..g.end].iter().map(|&m| order[m]).collect(), g.mean)).collect();
        let done = gaps[k] > r;
        if best.as_ref().is_none_or(|b| res.len() > b.0 || (res.len() == b.0 && cost < b.1)) {
            best = Some((res.len(), cost, res));
        }
        // With the cut in a gap wider than the radius the wrap constraint
        // holds automatically and every other cut yields the same groups.
        if done {
            break;
        }
    }
    match best {
        Some((_, _, res)) => res,
        None => greedy_groups(values, weights, r, Some(period)),
    }
}

fn segment_weight(s: &PixelSegment) -> f64 {
    s.length().max(1e-12)
}

/// Orthogonal orientation frames of `segments`.
pub fn orientation_frames(segments: &[PixelSegment], theta_par: f64) -> Vec<OrientationCluster> {
    let folded: Vec<f64> = segments.iter().map(|s| s.angle().rem_euclid(FRAC_PI_2)).collect();
    let weights: Vec<f64> = segments.iter().map(segment_weight).collect();
    group_circular(&folded, &weights, rotation_radius(theta_par), FRAC_PI_2)
        .into_iter()
        .map(|(mut members, mean)| {
            members.sort_unstable();
            let total_length = members.iter().map(|&i| segments[i].length()).sum();
            OrientationCluster { representative_angle: mean.rem_euclid(PI), members, total_length }
        })
        .collect()
}

/// Rotates `s` about its midpoint onto the nearest direction
/// `frame + k·π/2`; returns the snapped segment and `k mod 2`.
fn snap(s: &PixelSegment, frame: f64) -> (PixelSegment, usize) {
    let alpha = s.angle();
    let k = ((alpha - frame) / FRAC_PI_2).round();
    let target = frame + k * FRAC_PI_2;
    let class = (k as i64).rem_euclid(2) as usize;
    if (target - alpha).abs() <= ANGLE_EPS {
        return (*s, class);
    }
    let m = (s.p0 + s.p1) / 2.0;
    let h = Point2::new(target.cos(), target.sin()) * (s.length() / 2.0);
    (PixelSegment { p0: m - h, p1: m + h, ..*s }, class)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedSegment {
    pub segment: PixelSegment,
    /// Input indices merged into this segment, ascending.
    pub members: Vec<usize>,
}

pub fn regularize_traced(segments: &[PixelSegment], theta_par: f64, delta_col: f64) -> Vec<RegularizedSegment> {
    let frames = orientation_frames(segments, theta_par);
    let mut snapped: Vec<PixelSegment> = segments.to_vec();
    let mut key = vec![(0usize, 0usize); segments.len()];
    let mut frame_angle = vec![0.0; frames.len()];
    for (f, cl) in frames.iter().enumerate() {
        let members: Vec<f64> = cl.members.iter().map(|&i| segments[i].angle().rem_euclid(FRAC_PI_2)).collect();
        let weights: Vec<f64> = cl.members.iter().map(|&i| segment_weight(&segments[i])).collect();
        // Recover the unrolled mean so that members straddling 0 average correctly.
        let pivot = members[0];
        let unrolled: Vec<f64> =
            members.iter().map(|&v| pivot + ((v - pivot + FRAC_PI_2 / 2.0).rem_euclid(FRAC_PI_2) - FRAC_PI_2 / 2.0)).collect();
        frame_angle[f] = weighted_mean(&unrolled, &weights);
        for &i in &cl.members {
            let (s, class) = snap(&segments[i], frame_angle[f]);
            snapped[i] = s;
            key[i] = (f, class);
        }
    }

    let mut out: Vec<RegularizedSegment> = Vec::new();
    for (f, _) in frames.iter().enumerate() {
        for class in 0..2 {
            let idx: Vec<usize> = (0..segments.len()).filter(|&i| key[i] == (f, class)).collect();
            if idx.is_empty() {
                continue;
            }
            let beta = frame_angle[f] + class as f64 * FRAC_PI_2;
            let d = Point2::new(beta.cos(), beta.sin());
            let n = d.perp();
            let offsets: Vec<f64> = idx.iter().map(|&i| ((snapped[i].p0 + snapped[i].p1) / 2.0).dot(n)).collect();
            let weights: Vec<f64> = idx.iter().map(|&i| segment_weight(&snapped[i])).collect();
            for (members, mean) in group_linear(&offsets, &weights, delta_col) {
                let mut parts: Vec<(f64, f64, usize)> = Vec::new();
                for &m in &members {
                    let i = idx[m];
                    let shift = mean - offsets[m];
                    if shift.abs() > OFFSET_EPS {
                        snapped[i].p0 = snapped[i].p0 + n * shift;
                        snapped[i].p1 = snapped[i].p1 + n * shift;
                    }
                    let (t0, t1) = (snapped[i].p0.dot(d), snapped[i].p1.dot(d));
                    parts.push((t0.min(t1), t0.max(t1), i));
                }
                parts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
                let mut k = 0;
                while k < parts.len() {
                    let mut end = parts[k].1;
                    let mut j = k + 1;
                    while j < parts.len() && parts[j].0 <= end + OFFSET_EPS {
                        end = end.max(parts[j].1);
                        j += 1;
                    }
                    let run: Vec<usize> = parts[k..j].iter().map(|p| p.2).collect();
                    out.push(merge_run(&snapped, &run, parts[k].0, end, mean, d, n));
                    k = j;
                }
            }
        }
    }
    out.sort_by_key(|r| r.members[0]);
    out
}

fn merge_run(
    snapped: &[PixelSegment],
    run: &[usize],
    t_min: f64,
    t_max: f64,
    offset: f64,
    d: Point2<f64>,
    n: Point2<f64>,
) -> RegularizedSegment {
    let mut members = run.to_vec();
    members.sort_unstable();
    if run.len() == 1 {
        return RegularizedSegment { segment: snapped[run[0]], members };
    }
    let longest = *run
        .iter()
        .max_by(|&&a, &&b| snapped[a].length().total_cmp(&snapped[b].length()).then(b.cmp(&a)))
        .unwrap();
    let on_line = |t: f64| n * offset + d * t;
    let (mut p0, mut p1) = (on_line(t_min), on_line(t_max));
    let ls = &snapped[longest];
    if (ls.p1 - ls.p0).dot(d) < 0.0 {
        std::mem::swap(&mut p0, &mut p1);
    }
    let total: f64 = run.iter().map(|&i| snapped[i].length()).sum();
    let score = run.iter().map(|&i| snapped[i].score * snapped[i].length()).sum::<f64>() / total.max(1e-300);
    let width = run.iter().map(|&i| snapped[i].width).fold(0.0, f64::max);
    RegularizedSegment { segment: PixelSegment { p0, p1, width, score }, members }
}

pub fn regularize_segments(segments: &[PixelSegment], theta_par: f64, delta_col: f64) -> Vec<PixelSegment> {
    regularize_traced(segments, theta_par, delta_col).into_iter().map(|r| r.segment).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg_at(cx: f64, cy: f64, len: f64, deg: f64) -> PixelSegment {
        let a = deg.to_radians();
        let h = Point2::new(a.cos(), a.sin()) * (len / 2.0);
        let c = Point2::new(cx, cy);
        PixelSegment::new(c - h, c + h)
    }

    #[test]
    fn exact_axes_are_fixed() {
        let s = vec![
            PixelSegment::new(Point2::new(0.0, 0.0), Point2::new(10.0, 0.0)),
            PixelSegment::new(Point2::new(50.0, 40.0), Point2::new(50.0, 60.0)),
        ];
        assert_eq!(regularize_segments(&s, 5f64.to_radians(), 2.0), s);
    }

    #[test]
    fn three_segments_share_one_frame() {
        let s = vec![seg_at(0.0, 0.0, 20.0, 0.5), seg_at(0.0, 40.0, 10.0, -0.7), seg_at(80.0, 0.0, 30.0, 89.6)];
        let out = regularize_segments(&s, 5f64.to_radians(), 2.0);
        assert_eq!(out.len(), 3);
        let expect = (20.0 * 0.5 + 10.0 * -0.7 + 30.0 * -0.4) / 60.0;
        let got = out[0].angle().to_degrees();
        assert!((got - expect).abs() < 1e-9, "{got} vs {expect}");
        assert!((out[1].angle().to_degrees() - expect).abs() < 1e-9);
        assert!((out[2].angle().to_degrees() - (expect + 90.0)).abs() < 1e-9);
    }

    #[test]
    fn collinear_pair_merges() {
        let s = vec![
            PixelSegment::new(Point2::new(0.0, 0.0), Point2::new(10.0, 0.0)),
            PixelSegment::new(Point2::new(8.0, 1.0), Point2::new(20.0, 1.0)),
        ];
        let out = regularize_segments(&s, 5f64.to_radians(), 2.0);
        assert_eq!(out.len(), 1);
        let mean = 12.0 / 22.0;
        assert!((out[0].p0.x - 0.0).abs() < 1e-12 && (out[0].p1.x - 20.0).abs() < 1e-12);
        assert!((out[0].p0.y - mean).abs() < 1e-12 && (out[0].p1.y - mean).abs() < 1e-12);
    }

    #[test]
    fn oblique_stays_separate() {
        let s = vec![seg_at(0.0, 0.0, 20.0, 0.0), seg_at(50.0, 0.0, 20.0, 45.0)];
        let out = regularize_segments(&s, 5f64.to_radians(), 2.0);
        assert_eq!(out, s);
    }

    #[test]
    fn partition_prefers_more_groups() {
        let v = [0.0, 1.0, 2.0, 3.0];
        let w = [1.0; 4];
        // {0}, {1, 2}, {3}: means 0, 1.5, 3 are pairwise more than 1 apart.
        let g = partition_sorted(&v, &w, 1.0).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!((g[1].start, g[1].end), (1, 3));
    }
}
