use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geom::Point2;
use crate::{Error, Result, Scalar};

/// Axis-aligned affine map between pixel coordinates and world coordinates.
///
/// `(origin_x, origin_y)` is the world position of the top-left corner of the
/// top-left pixel; pixel `(px, py)` spans `[px, px+1) × [py, py+1)` and world
/// `y` decreases as the pixel row grows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldTransform<T> {
    pub origin_x: T,
    pub origin_y: T,
    pub pixel_size: T,
}

impl<T: Scalar> WorldTransform<T> {
    pub fn new(origin_x: T, origin_y: T, pixel_size: T) -> Result<Self> {
        if !(pixel_size > T::zero()) || !pixel_size.is_finite() {
            return Err(Error::Geometry(format!("pixel size must be positive, got {pixel_size}")));
        }
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(Error::Geometry("non-finite transform origin".into()));
        }
        Ok(Self {
            origin_x,
            origin_y,
            pixel_size,
        })
    }

    #[inline]
    pub fn pixel_to_world(&self, p: Point2<T>) -> Point2<T> {
        Point2::new(self.origin_x + p.x * self.pixel_size, self.origin_y - p.y * self.pixel_size)
    }

    #[inline]
    pub fn world_to_pixel(&self, g: Point2<T>) -> Point2<T> {
        Point2::new((g.x - self.origin_x) / self.pixel_size, (self.origin_y - g.y) / self.pixel_size)
    }

    /// Transform of a sub-grid whose top-left pixel sits at `(px, py)`.
    pub fn shifted(&self, px: T, py: T) -> Self {
        let o = self.pixel_to_world(Point2::new(px, py));
        Self {
            origin_x: o.x,
            origin_y: o.y,
            pixel_size: self.pixel_size,
        }
    }
}

/// Reads a 6-line world file: `A D B E C F` with `D = B = 0` and `A = -E`.
pub fn read_world_file(path: &Path) -> Result<WorldTransform<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let mut vals = Vec::with_capacity(6);
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let v: f64 = t
            .parse()
            .map_err(|_| Error::parse(&name, i + 1, format!("not a number: {t:?}")))?;
        if !v.is_finite() {
            return Err(Error::parse(&name, i + 1, "non-finite value"));
        }
        vals.push((i + 1, v));
    }
    if vals.len() != 6 {
        return Err(Error::parse(&name, vals.len(), format!("expected 6 values, found {}", vals.len())));
    }
    let (sx, d, b, sy) = (vals[0].1, vals[1].1, vals[2].1, vals[3].1);
    if d != 0.0 || b != 0.0 {
        return Err(Error::parse(&name, vals[1].0, "rotation terms must be 0"));
    }
    if !(sx > 0.0) || !(sy < 0.0) {
        return Err(Error::parse(&name, vals[0].0, "expected positive x and negative y pixel size"));
    }
    if ((sx + sy) / sx).abs() > 1e-12 {
        return Err(Error::parse(&name, vals[3].0, "pixels must be square"));
    }
    WorldTransform::new(vals[4].1, vals[5].1, sx)
}

pub fn write_world_file(path: &Path, t: &WorldTransform<f64>) -> Result<()> {
    let text = format!(
        "{}\n0\n0\n{}\n{}\n{}\n",
        t.pixel_size, -t.pixel_size, t.origin_x, t.origin_y
    );
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_integer_pixels() {
        let t = WorldTransform::new(85_000.25, 447_123.5, 0.08).unwrap();
        for py in (0..2000).step_by(37) {
            for px in (0..2000).step_by(41) {
                let p = Point2::new(px as f64, py as f64);
                let q = t.world_to_pixel(t.pixel_to_world(p));
                assert!((q.x - p.x).abs() <= 1e-9 && (q.y - p.y).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn single_precision_instance() {
        let t = WorldTransform::new(0.0_f32, 100.0, 1.0).unwrap();
        assert_eq!(t.pixel_to_world(Point2::new(100.0, 100.0)), Point2::new(100.0, 0.0));
    }

    #[test]
    fn rejects_non_positive_pixel_size() {
        assert!(WorldTransform::new(0.0, 0.0, 0.0).is_err());
        assert!(WorldTransform::new(0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn world_file_round_trip_and_rotation_check() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.wld");
        let t = WorldTransform::new(12.5, 99.75, 0.1).unwrap();
        write_world_file(&p, &t).unwrap();
        assert_eq!(read_world_file(&p).unwrap(), t);
        std::fs::write(&p, "0.1\n0.01\n0\n-0.1\n0\n0\n").unwrap();
        assert!(read_world_file(&p).is_err());
    }
}
