//! Roofline extraction from true orthophotos and LoD2 building reconstruction.
//!
//! The pipeline crops one image per (merged) building footprint from a tiled
//! orthophoto mosaic, detects straight line segments, regularizes them,
//! extends them with a kinetic process, keeps the part inside a buffer around
//! the footprint, georeferences the result and uses it to subdivide the
//! footprint. Roof planes are fitted from a point cloud and the footprint is
//! extruded into a watertight solid. [`evaluate`] holds the quality metrics.
//!
//! Geometry kernels are generic over [`Scalar`] (`f32` or `f64`); the pipeline
//! stages run on `f64` through the aliases defined here.

pub mod arrangement;
pub mod config;
pub mod cropper;
pub mod error;
pub mod evaluate;
pub mod geodata;
pub mod geom;
pub mod georef_filter;
pub mod kinetic;
pub mod linedetect;
pub mod pipeline;
pub mod reconstruct;
pub mod regularize;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Roof plane in double precision.
pub type RoofPlanef = reconstruct::RoofPlane<f64>;
/// 2D point in double precision (pixel or world frame).
pub type Point2f = geom::Point2<f64>;
/// 3D point in double precision.
pub type Point3f = geom::Point3<f64>;
/// 2D segment in double precision.
pub type Segment2f = geom::Segment2<f64>;
/// Polygon with holes in double precision.
pub type Polygon2f = geom::Polygon2<f64>;
/// Affine pixel/world mapping in double precision.
pub type WorldTransformf = geodata::WorldTransform<f64>;


