//! Footprint buffer filtering and pixel/world conversion of rooflines.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cropper::BuildingCrop;
use crate::geodata::{Footprint, WorldTransform};
use crate::geom::{buffer_polygon, clip_segment_to_polygon, Point2, Polygon2, Segment2};
use crate::kinetic::ExtendedSegment;
use crate::linedetect::PixelSegment;
use crate::{Error, Result, Scalar};

pub const DEFAULT_BUFFER_RADIUS: f64 = 60.0;
pub const CHORDS_PER_CORNER: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoSegment {
    pub g0: Point2<f64>,
    pub g1: Point2<f64>,
    pub source_building: String,
}

impl GeoSegment {
    pub fn segment(&self) -> Segment2<f64> {
        Segment2::new(self.g0, self.g1)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClipMode {
    /// Keep only the parts inside the buffer.
    #[default]
    Clip,
    /// Keep whole segments unless they lie entirely outside.
    DiscardOnly,
}

/// Pixel → world for a crop at offset `b` of a mosaic with top-left corner
/// `t` and pixel size `s`.
pub fn pixel_to_geo_raw<T: Scalar>(p: Point2<T>, t: Point2<T>, b: Point2<T>, s: T) -> Point2<T> {
    Point2::new(t.x + (p.x + b.x) * s, t.y - (p.y + b.y) * s)
}

pub fn geo_to_pixel_raw<T: Scalar>(g: Point2<T>, t: Point2<T>, b: Point2<T>, s: T) -> Point2<T> {
    Point2::new((g.x - t.x) / s - b.x, (t.y - g.y) / s - b.y)
}

fn crop_frame(crop: &BuildingCrop) -> (Point2<f64>, Point2<f64>, f64) {
    let t: &WorldTransform<f64> = &crop.source_transform;
    (Point2::new(t.origin_x, t.origin_y), crop.offset(), t.pixel_size)
}

pub fn pixel_to_geo(p: Point2<f64>, crop: &BuildingCrop) -> Point2<f64> {
    let (t, b, s) = crop_frame(crop);
    pixel_to_geo_raw(p, t, b, s)
}

pub fn geo_to_pixel(g: Point2<f64>, crop: &BuildingCrop) -> Point2<f64> {
    let (t, b, s) = crop_frame(crop);
    geo_to_pixel_raw(g, t, b, s)
}

/// Footprint projected into crop pixels and grown by `radius_px`.
pub fn buffer_footprint(footprint: &Footprint, radius_px: f64, crop: &BuildingCrop) -> Result<Polygon2<f64>> {
    buffer_footprint_with(footprint, radius_px, CHORDS_PER_CORNER, crop)
}

pub fn buffer_footprint_with(footprint: &Footprint, radius_px: f64, chords: usize, crop: &BuildingCrop) -> Result<Polygon2<f64>> {
    let px = footprint.polygon.map(|g| geo_to_pixel(g, crop));
    buffer_polygon(&Polygon2::new(px.outer, px.holes), radius_px, chords)
}

pub fn clip_segments(extended: &[ExtendedSegment], buffer: &Polygon2<f64>, mode: ClipMode) -> Vec<PixelSegment> {
    let mut out = Vec::new();
    for e in extended {
        let intervals = clip_segment_to_polygon(e.p0, e.p1, buffer);
        match mode {
            ClipMode::DiscardOnly => {
                if !intervals.is_empty() {
                    out.push(e.to_pixel_segment());
                }
            }
            ClipMode::Clip => {
                let s = e.segment();
                for (t0, t1) in intervals {
                    let p0 = if t0 == 0.0 { e.p0 } else { s.at(t0) };
                    let p1 = if t1 == 1.0 { e.p1 } else { s.at(t1) };
                    if p0 != p1 {
                        out.push(PixelSegment { p0, p1, width: e.width, score: e.score });
                    }
                }
            }
        }
    }
    out
}

pub fn georeference(segments: &[PixelSegment], crop: &BuildingCrop) -> Vec<GeoSegment> {
    segments
        .iter()
        .map(|s| GeoSegment {
            g0: pixel_to_geo(s.p0, crop),
            g1: pixel_to_geo(s.p1, crop),
            source_building: crop.building_id.clone(),
        })
        .collect()
}

pub fn rooflines_geojson(segments: &[GeoSegment]) -> Value {
    let features: Vec<Value> = segments
        .iter()
        .map(|s| {
            json!({
                "type": "Feature",
                "properties": { "building": s.source_building },
                "geometry": { "type": "LineString", "coordinates": [[s.g0.x, s.g0.y], [s.g1.x, s.g1.y]] }
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

pub fn write_rooflines(path: &Path, segments: &[GeoSegment]) -> Result<()> {
    let text = serde_json::to_string_pretty(&rooflines_geojson(segments)).expect("json values serialize");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads LineString features; multi-vertex lines become consecutive segments.
pub fn read_rooflines(path: &Path) -> Result<Vec<GeoSegment>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::Load { what: path.display().to_string(), reason };
    let v: Value = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let features = v["features"].as_array().ok_or_else(|| bad("missing features array".into()))?;
    let mut out = Vec::new();
    for f in features {
        let building = f["properties"]["building"].as_str().unwrap_or_default().to_string();
        let coords = f["geometry"]["coordinates"].as_array().ok_or_else(|| bad("feature without coordinates".into()))?;
        let pts: Vec<Point2<f64>> = coords
            .iter()
            .map(|c| match (c[0].as_f64(), c[1].as_f64()) {
                (Some(x), Some(y)) => Ok(Point2::new(x, y)),
                _ => Err(bad("non-numeric coordinate".into())),
            })
            .collect::<Result<_>>()?;
        for w in pts.windows(2) {
            out.push(GeoSegment { g0: w[0], g1: w[1], source_building: building.clone() });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cropper::TileCase;
    use crate::geodata::GrayImage;
    use crate::kinetic::StopReason;

    fn crop(t: (f64, f64), s: f64, b: (usize, usize)) -> BuildingCrop {
        BuildingCrop {
            building_id: "b".into(),
            image: GrayImage::filled(4, 4, 0),
            crop_offset_x: b.0,
            crop_offset_y: b.1,
            source_transform: WorldTransform::new(t.0, t.1, s).unwrap(),
            case: TileCase::Single,
        }
    }

    #[test]
    fn origin_identity() {
        let c = crop((12.5, 80.0), 0.3, (0, 0));
        assert_eq!(pixel_to_geo(Point2::new(0.0, 0.0), &c), Point2::new(12.5, 80.0));
    }

    #[test]
    fn hand_example() {
        let c = crop((100.0, 500.0), 0.08, (10, 20));
        let g = pixel_to_geo(Point2::new(5.0, 5.0), &c);
        assert!((g.x - 101.2).abs() < 1e-12 && (g.y - 498.0).abs() < 1e-12);
        let p = geo_to_pixel(g, &c);
        assert!((p.x - 5.0).abs() < 1e-9 && (p.y - 5.0).abs() < 1e-9);
    }

    fn ext(ax: f64, ay: f64, bx: f64, by: f64) -> ExtendedSegment {
        ExtendedSegment {
            origin: 0,
            p0: Point2::new(ax, ay),
            p1: Point2::new(bx, by),
            stop_reasons: [StopReason::Boundary; 2],
            crossings: [0; 2],
            width: 1.0,
            score: 1.0,
        }
    }

    #[test]
    fn clipping_cases() {
        let sq = Polygon2::new(
            vec![Point2::new(0.0, 0.0), Point2::new(10.0, 0.0), Point2::new(10.0, 10.0), Point2::new(0.0, 10.0)],
            vec![],
        );
        let out = clip_segments(&[ext(20.0, 0.0, 30.0, 5.0)], &sq, ClipMode::Clip);
        assert!(out.is_empty());
        let inside = ext(1.0, 1.0, 9.0, 8.0);
        assert_eq!(clip_segments(&[inside], &sq, ClipMode::Clip), vec![inside.to_pixel_segment()]);
        let out = clip_segments(&[ext(5.0, 5.0, 15.0, 5.0)], &sq, ClipMode::Clip);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].p1, Point2::new(10.0, 5.0));
        let out = clip_segments(&[ext(5.0, 5.0, 15.0, 5.0)], &sq, ClipMode::DiscardOnly);
        assert_eq!(out[0].p1, Point2::new(15.0, 5.0));
    }

    #[test]
    fn buffer_radius_zero_keeps_shape() {
        let fp = Footprint::new(
            "a",
            vec![Point2::new(0.0, 0.0), Point2::new(8.0, 0.0), Point2::new(8.0, 4.0), Point2::new(0.0, 4.0)],
            vec![],
        )
        .unwrap();
        let c = crop((-10.0, 10.0), 0.5, (0, 0));
        let b = buffer_footprint(&fp, 0.0, &c).unwrap();
        assert!((b.area() - 32.0 / 0.25).abs() < 1e-9);
    }

    #[test]
    fn rooflines_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.geojson");
        let segs = vec![GeoSegment { g0: Point2::new(1.5, 2.25), g1: Point2::new(-3.0, 4.0), source_building: "x".into() }];
        write_rooflines(&p, &segs).unwrap();
        assert_eq!(read_rooflines(&p).unwrap(), segs);
    }
}
