use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::geom::{Point2, Point3};
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        if let Some(i) = points
            .iter()
            .position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()))
        {
            return Err(Error::Input(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Parses ASCII XYZ: one `x y z` record per line, `#` starts a comment.
pub fn parse_pointcloud(text: &str, name: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::parse(name, i + 1, format!("expected 3 fields, found {}", fields.len())));
        }
        let mut xyz = [0.0_f64; 3];
        for (v, f) in xyz.iter_mut().zip(&fields) {
            *v = f
                .parse()
                .map_err(|_| Error::parse(name, i + 1, format!("not a number: {f:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(name, i + 1, "non-finite coordinate"));
            }
        }
        points.push(Point3::new(xyz[0], xyz[1], xyz[2]));
    }
    Ok(PointCloud { points })
}

pub fn load_pointcloud(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pointcloud(&text, &path.display().to_string())
}

pub fn write_pointcloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut s = String::with_capacity(cloud.len() * 32);
    for p in &cloud.points {
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Uniform-grid index over the planimetric (x, y) positions of a cloud.
#[derive(Clone, Debug)]
pub struct PointIndex {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl PointIndex {
    pub fn build(cloud: &PointCloud, cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in cloud.points.iter().enumerate() {
            buckets
                .entry(((p.x / cell).floor() as i64, (p.y / cell).floor() as i64))
                .or_default()
                .push(i);
        }
        Self { cell, buckets }
    }

    /// Indices of points with `lo <= (x, y) <= hi`, ascending.
    pub fn query(&self, cloud: &PointCloud, lo: Point2<f64>, hi: Point2<f64>) -> Vec<usize> {
        let (cx0, cy0) = ((lo.x / self.cell).floor() as i64, (lo.y / self.cell).floor() as i64);
        let (cx1, cy1) = ((hi.x / self.cell).floor() as i64, (hi.y / self.cell).floor() as i64);
        let mut out = Vec::new();
        for cx in cx0..=cx1 {
            for cy in cy0..=cy1 {
                if let Some(b) = self.buckets.get(&(cx, cy)) {
                    out.extend(b.iter().copied().filter(|&i| {
                        let p = cloud.points[i];
                        p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y
                    }));
                }
            }
        }
        out.sort_unstable();
        out
    }
}
