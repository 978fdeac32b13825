//! Scalar-generic 2D/3D primitives shared by every stage.

mod buffer;
mod point;
mod polygon;

pub use buffer::{buffer_polygon, union_all};
pub(crate) use buffer::union_pair;
pub use point::{Point2, Point3, Segment2};
pub use polygon::{
    clip_segment_to_polygon, interior_point, point_segment_distance, ring_contains, ring_is_simple,
    signed_area, Polygon2,
};

use crate::Scalar;

/// Intersection of two lines given as `p + t·r` and `q + u·s`.
///
/// Returns the parameters `(t, u)`, or `None` when the directions are
/// parallel to within `parallel_eps` radians.
pub fn line_intersection<T: Scalar>(
    p: Point2<T>,
    r: Point2<T>,
    q: Point2<T>,
    s: Point2<T>,
    parallel_eps: T,
) -> Option<(T, T)> {
    let denom = r.cross(s);
    let scale = r.norm() * s.norm();
    if scale == T::zero() || (denom / scale).abs() < parallel_eps {
        return None;
    }
    let qp = q - p;
    Some((qp.cross(s) / denom, qp.cross(r) / denom))
}

/// Wraps an angle into `[0, period)`.
pub fn wrap_angle<T: Scalar>(a: T, period: T) -> T {
    let mut w = a % period;
    if w < T::zero() {
        w = w + period;
    }
    if w >= period {
        w = w - period;
    }
    w
}
