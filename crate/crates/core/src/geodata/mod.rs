//! Loading and validation of the external inputs: raster tiles with world
//! files, footprint polygons and point clouds.

mod footprint;
mod merge;
mod pointcloud;
mod raster;
mod transform;

pub use footprint::{
    footprints_geojson, load_footprints, load_footprints_lenient, parse_footprints, write_footprints, Footprint,
    FootprintIssue,
};
pub use merge::merge_adjacent_footprints;
pub use pointcloud::{load_pointcloud, parse_pointcloud, write_pointcloud, PointCloud, PointIndex};
pub use raster::{load_mosaic, read_raster, GrayImage, Mosaic, RasterTile, TileEntry};
pub use transform::{read_world_file, write_world_file, WorldTransform};
