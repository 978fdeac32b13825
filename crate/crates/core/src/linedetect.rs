//! Gradient-based line segment detection by seeded region growing.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geodata::GrayImage;
use crate::geom::{wrap_angle, Point2, Segment2};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelSegment {
    pub p0: Point2<f64>,
    pub p1: Point2<f64>,
    pub width: f64,
    pub score: f64,
}

impl PixelSegment {
    pub fn new(p0: Point2<f64>, p1: Point2<f64>) -> Self {
        Self { p0, p1, width: 1.0, score: 1.0 }
    }

    pub fn segment(&self) -> Segment2<f64> {
        Segment2::new(self.p0, self.p1)
    }

    pub fn length(&self) -> f64 {
        self.p0.dist(self.p1)
    }

    pub fn angle(&self) -> f64 {
        self.segment().angle()
    }
}

/// Per-pixel gradient samples. Sample `(x, y)` comes from the 2×2 block whose
/// top-left pixel is `(x, y)`; it sits at the block centre `(x + 1, y + 1)`
/// in continuous pixel coordinates. The last row and column hold zeros.
#[derive(Clone, Debug)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub magnitude: Vec<f64>,
    pub level_line_angle: Vec<f64>,
    /// `true` where the pixel may take part in a region.
    pub usable: Vec<bool>,
}

impl GradientField {
    pub fn position(&self, idx: usize) -> Point2<f64> {
        Point2::new((idx % self.width) as f64 + 1.0, (idx / self.width) as f64 + 1.0)
    }

    pub fn is_masked(&self, x: usize, y: usize) -> bool {
        !self.usable[y * self.width + x]
    }
}

pub fn gradient_field(image: &GrayImage, rho: f64) -> Result<GradientField> {
    let (w, h) = (image.width, image.height);
    if w < 4 || h < 4 {
        return Err(Error::Input(format!("image {w}x{h} is smaller than 4x4")));
    }
    if !(rho >= 0.0) {
        return Err(Error::Input(format!("magnitude threshold {rho} must be non-negative")));
    }
    let mut magnitude = vec![0.0; w * h];
    let mut angle = vec![0.0; w * h];
    let mut usable = vec![false; w * h];
    let px = |x: usize, y: usize| image.pixels[y * w + x] as f64;
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            let gx = (px(x + 1, y) + px(x + 1, y + 1) - px(x, y) - px(x, y + 1)) / 2.0;
            let gy = (px(x, y + 1) + px(x + 1, y + 1) - px(x, y) - px(x + 1, y)) / 2.0;
            let i = y * w + x;
            magnitude[i] = gx.hypot(gy);
            angle[i] = gx.atan2(-gy);
            usable[i] = magnitude[i] > 0.0 && magnitude[i] >= rho;
        }
    }
    Ok(GradientField { width: w, height: h, magnitude, level_line_angle: angle, usable })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectParams {
    pub tau: f64,
    pub min_length: f64,
    pub density_threshold: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self { tau: 22.5_f64.to_radians(), min_length: 10.0, density_threshold: 0.7 }
    }
}

#[derive(Clone, Debug)]
pub struct Region {
    pub pixels: Vec<usize>,
    pub angle: f64,
}

fn grow_region(field: &GradientField, seed: usize, tau: f64, used: &mut [bool]) -> Region {
    let (w, h) = (field.width as isize, field.height as isize);
    let mut pixels = vec![seed];
    used[seed] = true;
    let a0 = field.level_line_angle[seed];
    let (mut sx, mut sy) = (a0.cos(), a0.sin());
    let mut mean = a0;
    let mut k = 0;
    while k < pixels.len() {
        let p = pixels[k];
        k += 1;
        let (x, y) = ((p % field.width) as isize, (p / field.width) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if (dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let q = (ny * w + nx) as usize;
                if used[q] || !field.usable[q] {
                    continue;
                }
                let a = field.level_line_angle[q];
                if angle_diff(a, mean).abs() > tau {
                    continue;
                }
                used[q] = true;
                pixels.push(q);
                sx += a.cos();
                sy += a.sin();
                mean = sy.atan2(sx);
            }
        }
    }
    Region { pixels, angle: mean }
}

/// Signed difference `a - b` wrapped to `[-π, π)`.
fn angle_diff(a: f64, b: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    wrap_angle(a - b + PI, TAU) - PI
}

/// Fits the principal-axis rectangle of a region; returns the segment with
/// `score` set to the aligned-pixel density.
pub fn fit_rectangle(field: &GradientField, region: &Region) -> PixelSegment {
    let (mut sw, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for &i in &region.pixels {
        let m = field.magnitude[i];
        let p = field.position(i);
        sw += m;
        cx += m * p.x;
        cy += m * p.y;
    }
    let c = Point2::new(cx / sw, cy / sw);
    let (mut cxx, mut cyy, mut cxy) = (0.0, 0.0, 0.0);
    for &i in &region.pixels {
        let m = field.magnitude[i];
        let d = field.position(i) - c;
        cxx += m * d.x * d.x;
        cyy += m * d.y * d.y;
        cxy += m * d.x * d.y;
    }
    let mut theta = 0.5 * (2.0 * cxy).atan2(cxx - cyy);
    if region.pixels.len() == 1 {
        theta = region.angle;
    }
    if (theta - region.angle).cos() < 0.0 {
        theta += std::f64::consts::PI;
    }
    let d = Point2::new(theta.cos(), theta.sin());
    let n = d.perp();
    let (mut lmin, mut lmax, mut wmin, mut wmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &i in &region.pixels {
        let q = field.position(i) - c;
        let (l, t) = (q.dot(d), q.dot(n));
        lmin = lmin.min(l);
        lmax = lmax.max(l);
        wmin = wmin.min(t);
        wmax = wmax.max(t);
    }
    let (l0, l1) = (lmin - 0.5, lmax + 0.5);
    let len = l1 - l0;
    let width = wmax - wmin + 1.0;
    let density = (region.pixels.len() as f64 / (len * width)).min(1.0);
    // Centre the segment on the rectangle's mid-line across the width.
    let c = c + n * ((wmin + wmax) / 2.0);
    PixelSegment { p0: c + d * l0, p1: c + d * l1, width, score: density }
}

/// Detected segments together with the pixel indices of their regions.
pub fn detect_regions(field: &GradientField, params: &DetectParams) -> Vec<(PixelSegment, Region)> {
    let mut order: Vec<usize> = (0..field.magnitude.len()).filter(|&i| field.usable[i]).collect();
    order.sort_by(|&a, &b| field.magnitude[b].total_cmp(&field.magnitude[a]).then(a.cmp(&b)));
    let mut used = vec![false; field.magnitude.len()];
    let mut out = Vec::new();
    for seed in order {
        if used[seed] {
            continue;
        }
        let region = grow_region(field, seed, params.tau, &mut used);
        let seg = fit_rectangle(field, &region);
        if seg.length() >= params.min_length && seg.score >= params.density_threshold {
            out.push((seg, region));
        }
    }
    out
}

pub fn detect_segments(field: &GradientField, params: &DetectParams) -> Vec<PixelSegment> {
    detect_regions(field, params).into_iter().map(|(s, _)| s).collect()
}

pub fn segments_csv(segments: &[PixelSegment]) -> String {
    let mut s = String::from("x0,y0,x1,y1,width,score\n");
    for g in segments {
        let _ = writeln!(s, "{},{},{},{},{},{}", g.p0.x, g.p0.y, g.p1.x, g.p1.y, g.width, g.score);
    }
    s
}

pub fn write_segments_csv(path: &Path, segments: &[PixelSegment]) -> Result<()> {
    std::fs::write(path, segments_csv(segments)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_image() -> GrayImage {
        GrayImage::from_fn(100, 100, |x, _| if x < 50 { 0 } else { 100 })
    }

    #[test]
    fn constant_image_is_fully_masked() {
        let f = gradient_field(&GrayImage::filled(20, 20, 77), 0.0).unwrap();
        assert!(f.magnitude.iter().all(|&m| m == 0.0));
        assert!(f.usable.iter().all(|&u| !u));
    }

    #[test]
    fn step_edge_gradient() {
        let f = gradient_field(&step_image(), 5.0).unwrap();
        for y in 0..99 {
            assert_eq!(f.magnitude[y * 100 + 49], 100.0);
            assert_eq!(f.level_line_angle[y * 100 + 49], std::f64::consts::FRAC_PI_2);
            assert_eq!(f.magnitude[y * 100 + 48], 0.0);
        }
    }

    #[test]
    fn high_threshold_masks_everything() {
        let img = GrayImage::from_fn(30, 30, |x, y| ((x * 7 + y * 13) % 255) as u8);
        let f = gradient_field(&img, 255.0).unwrap();
        assert!(f.usable.iter().all(|&u| !u));
    }

    #[test]
    fn too_small() {
        assert!(gradient_field(&GrayImage::filled(3, 10, 0), 1.0).is_err());
    }

    #[test]
    fn single_vertical_edge() {
        let f = gradient_field(&step_image(), 5.0).unwrap();
        let segs = detect_segments(&f, &DetectParams::default());
        assert_eq!(segs.len(), 1);
        let s = segs[0];
        let (top, bot) = if s.p0.y < s.p1.y { (s.p0, s.p1) } else { (s.p1, s.p0) };
        assert!(top.dist(Point2::new(50.0, 0.0)) <= 2.0, "{top:?}");
        assert!(bot.dist(Point2::new(50.0, 99.0)) <= 2.0, "{bot:?}");
        let dev = (s.angle().abs() - std::f64::consts::FRAC_PI_2).abs();
        assert!(dev <= 2f64.to_radians());
    }

    #[test]
    fn plus_gives_four_arms() {
        let img = GrayImage::from_fn(100, 100, |x, y| if (x < 50) != (y < 50) { 100 } else { 0 });
        let f = gradient_field(&img, 5.0).unwrap();
        let segs = detect_segments(&f, &DetectParams::default());
        assert_eq!(segs.len(), 4);
        let truth = [
            Segment2::new(Point2::new(50.0, 0.0), Point2::new(50.0, 50.0)),
            Segment2::new(Point2::new(50.0, 50.0), Point2::new(50.0, 100.0)),
            Segment2::new(Point2::new(0.0, 50.0), Point2::new(50.0, 50.0)),
            Segment2::new(Point2::new(50.0, 50.0), Point2::new(100.0, 50.0)),
        ];
        for t in truth {
            let hit = segs.iter().any(|s| {
                let d = |a: Point2<f64>, b: Point2<f64>| a.dist(b) <= 2.0;
                (d(s.p0, t.a) && d(s.p1, t.b)) || (d(s.p0, t.b) && d(s.p1, t.a))
            });
            assert!(hit, "no segment near {t:?}: {segs:?}");
        }
    }
}
