//! Footprint subdivision, roof plane fitting, cell merging and extrusion to
//! LoD2 solids, plus model export.

mod export;
mod extrude;
mod fit;
mod merge;
mod partition;
mod solid;

pub use export::{
    cityjson_value, export_model, parse_cityjson, parse_obj, read_model, to_obj, ModelFormat,
};
pub use extrude::{extrude_solid, WELD_TOL};
pub use fit::{assign_and_fit, fit_plane, percentile, RoofPlane};
pub use merge::{merge_cells_elevation_prior, shared_edge_offset, MergeParams};
pub use partition::{partition_footprint, prepare_rooflines, Partition, PartitionCell, ARRANGEMENT_TOL};
pub use solid::{face_area, newell, project_2d, triangulate_face, Face, FaceRole, SolidModel, PLANARITY_TOL};

use crate::geodata::{Footprint, PointCloud};
use crate::geom::{buffer_polygon, Point2};
use crate::Result;

pub const DEFAULT_SNAP_TOL: f64 = 1e-3;

/// Low percentile of point heights inside `footprint` grown by
/// `buffer_m` metres; `None` without points.
pub fn base_elevation(footprint: &Footprint, cloud: &PointCloud, buffer_m: f64, q: f64) -> Result<Option<f64>> {
    let region = buffer_polygon(&footprint.polygon, buffer_m, 8)?;
    let (lo, hi) = region.bbox();
    let mut zs: Vec<f64> = cloud
        .points
        .iter()
        .filter(|p| p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y)
        .filter(|p| region.contains_with_tol(Point2::new(p.x, p.y), 1e-9))
        .map(|p| p.z)
        .collect();
    Ok(percentile(&mut zs, q))
}
