//! Per-building image extraction from the tiled mosaic.
//!
//! A building's pixel bounding box touches one tile, two tiles side by side,
//! two tiles stacked, or four tiles around a corner; the crop is stitched
//! from those tiles without resampling.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geodata::{Footprint, GrayImage, Mosaic, WorldTransform};
use crate::geom::Point2;
use crate::{Error, Result};

pub const DEFAULT_MARGIN: usize = 60;

/// Half-open integer pixel rectangle `[x0, x1) × [y0, y1)` in the mosaic's
/// global pixel frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TileCase {
    Single,
    HorizontalPair,
    VerticalPair,
    Quad,
}

#[derive(Clone, Debug)]
pub struct BuildingCrop {
    pub building_id: String,
    pub image: GrayImage,
    pub crop_offset_x: usize,
    pub crop_offset_y: usize,
    /// Transform of the whole mosaic (not of the crop).
    pub source_transform: WorldTransform<f64>,
    pub case: TileCase,
}

impl BuildingCrop {
    pub fn offset(&self) -> Point2<f64> {
        Point2::new(self.crop_offset_x as f64, self.crop_offset_y as f64)
    }

    pub fn write_debug_pgm(&self, dir: &Path) -> Result<()> {
        self.image.write_pgm(&dir.join(format!("{}.pgm", self.building_id)))
    }
}

/// Smallest integer pixel rectangle holding every footprint vertex, grown by
/// `margin` on each side and clamped to the mosaic.
pub fn footprint_pixel_bbox(footprint: &Footprint, mosaic: &Mosaic, margin: usize) -> Result<PixelRect> {
    let (lo, hi) = mosaic.world_extent();
    let eps = 1e-9 * mosaic.transform.pixel_size;
    let mut pmin = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut pmax = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &g in footprint.polygon.rings().flatten() {
        if g.x < lo.x - eps || g.x > hi.x + eps || g.y < lo.y - eps || g.y > hi.y + eps {
            return Err(Error::Coverage(format!(
                "footprint {} vertex ({}, {}) lies outside the mosaic",
                footprint.id, g.x, g.y
            )));
        }
        let p = mosaic.transform.world_to_pixel(g);
        pmin = Point2::new(pmin.x.min(p.x), pmin.y.min(p.y));
        pmax = Point2::new(pmax.x.max(p.x), pmax.y.max(p.y));
    }
    let (w, h) = (mosaic.width() as f64, mosaic.height() as f64);
    // Snap values within rounding noise of an integer before floor/ceil.
    let snap = |v: f64| if (v - v.round()).abs() < 1e-9 { v.round() } else { v };
    let mut x0 = snap(pmin.x).floor().clamp(0.0, w) as usize;
    let mut y0 = snap(pmin.y).floor().clamp(0.0, h) as usize;
    let mut x1 = snap(pmax.x).ceil().clamp(0.0, w) as usize;
    let mut y1 = snap(pmax.y).ceil().clamp(0.0, h) as usize;
    if x1 == x0 {
        if x1 < mosaic.width() {
            x1 += 1;
        } else {
            x0 -= 1;
        }
    }
    if y1 == y0 {
        if y1 < mosaic.height() {
            y1 += 1;
        } else {
            y0 -= 1;
        }
    }
    Ok(PixelRect {
        x0: x0.saturating_sub(margin),
        y0: y0.saturating_sub(margin),
        x1: (x1 + margin).min(mosaic.width()),
        y1: (y1 + margin).min(mosaic.height()),
    })
}

/// Classifies the tiles a rectangle touches and lists them as `(col, row)`
/// in row-major order.
pub fn resolve_tile_case(bbox: &PixelRect, mosaic: &Mosaic) -> Result<(TileCase, Vec<(usize, usize)>)> {
    if bbox.x1 > mosaic.width() || bbox.y1 > mosaic.height() || bbox.x0 >= bbox.x1 || bbox.y0 >= bbox.y1 {
        return Err(Error::Coverage(format!("rectangle {bbox:?} is not inside the mosaic")));
    }
    let (c0, c1) = (mosaic.column_of(bbox.x0), mosaic.column_of(bbox.x1 - 1));
    let (r0, r1) = (mosaic.row_of(bbox.y0), mosaic.row_of(bbox.y1 - 1));
    let case = match (c1 - c0 + 1, r1 - r0 + 1) {
        (1, 1) => TileCase::Single,
        (2, 1) => TileCase::HorizontalPair,
        (1, 2) => TileCase::VerticalPair,
        (2, 2) => TileCase::Quad,
        (nc, nr) => {
            return Err(Error::UnsupportedExtent(format!(
                "rectangle {bbox:?} spans {nc}x{nr} tiles; at most 2x2 is supported"
            )))
        }
    };
    let tiles = (r0..=r1).flat_map(|r| (c0..=c1).map(move |c| (c, r))).collect();
    Ok((case, tiles))
}

/// Stitches the crop covering `bbox` from the tiles it touches.
pub fn crop_rect(bbox: &PixelRect, mosaic: &Mosaic) -> Result<(TileCase, GrayImage)> {
    let (case, tiles) = resolve_tile_case(bbox, mosaic)?;
    let (w, h) = (bbox.width(), bbox.height());
    let mut pixels = vec![0u8; w * h];
    for (c, r) in tiles {
        let tile = mosaic.tile(c, r);
        let (tx, ty) = mosaic.tile_offset(c, r);
        let ix0 = bbox.x0.max(tx);
        let ix1 = bbox.x1.min(tx + tile.width());
        let iy0 = bbox.y0.max(ty);
        let iy1 = bbox.y1.min(ty + tile.height());
        for gy in iy0..iy1 {
            let src = (gy - ty) * tile.width();
            let dst = (gy - bbox.y0) * w;
            pixels[dst + ix0 - bbox.x0..dst + ix1 - bbox.x0]
                .copy_from_slice(&tile.image.pixels[src + ix0 - tx..src + ix1 - tx]);
        }
    }
    Ok((case, GrayImage::new(w, h, pixels)?))
}

pub fn crop_building(footprint: &Footprint, mosaic: &Mosaic, margin: usize) -> Result<BuildingCrop> {
    let bbox = footprint_pixel_bbox(footprint, mosaic, margin)?;
    let (case, image) = crop_rect(&bbox, mosaic)?;
    Ok(BuildingCrop {
        building_id: footprint.id.clone(),
        image,
        crop_offset_x: bbox.x0,
        crop_offset_y: bbox.y0,
        source_transform: mosaic.transform,
        case,
    })
}
