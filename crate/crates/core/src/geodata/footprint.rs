use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::geom::{ring_contains, ring_is_simple, Point2, Polygon2};
use crate::{Error, Result};

/// Georeferenced building ground plan.
#[derive(Clone, Debug, PartialEq)]
pub struct Footprint {
    pub id: String,
    pub polygon: Polygon2<f64>,
}

impl Footprint {
    /// Validates the rings and normalizes their orientation.
    pub fn new(id: impl Into<String>, outer: Vec<Point2<f64>>, holes: Vec<Vec<Point2<f64>>>) -> Result<Self> {
        let id = id.into();
        let polygon = Polygon2::new(outer, holes);
        validate_polygon(&polygon).map_err(|reason| Error::Geometry(format!("footprint {id}: {reason}")))?;
        Ok(Self { id, polygon })
    }

    pub fn outer(&self) -> &[Point2<f64>] {
        &self.polygon.outer
    }

    pub fn holes(&self) -> &[Vec<Point2<f64>>] {
        &self.polygon.holes
    }

    pub fn area(&self) -> f64 {
        self.polygon.area()
    }
}

pub(crate) fn validate_polygon(p: &Polygon2<f64>) -> std::result::Result<(), String> {
    if p.rings().flatten().any(|q| !q.is_finite()) {
        return Err("non-finite coordinate".into());
    }
    if !ring_is_simple(&p.outer) {
        return Err("outer ring is not simple".into());
    }
    for (k, h) in p.holes.iter().enumerate() {
        if !ring_is_simple(h) {
            return Err(format!("hole {k} is not simple"));
        }
        let strictly_inside = h
            .iter()
            .all(|&q| ring_contains(&p.outer, q) && Polygon2::new(p.outer.clone(), vec![]).boundary_distance(q) > 0.0);
        if !strictly_inside {
            return Err(format!("hole {k} is not strictly inside the outer ring"));
        }
    }
    if !(p.area() > 0.0) {
        return Err("zero area".into());
    }
    Ok(())
}

/// A feature that could not be turned into a footprint.
#[derive(Clone, Debug)]
pub struct FootprintIssue {
    pub index: usize,
    pub id: Option<String>,
    pub line: usize,
    pub reason: String,
}

/// Line numbers of `"type": "Feature"` members, in document order.
fn feature_lines(text: &str) -> Vec<usize> {
    let mut lines = Vec::new();
    let bytes = text.as_bytes();
    let mut line = 1;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\n' {
            line += 1;
        } else if text[i..].starts_with("\"type\"") {
            let rest = text[i + 6..].trim_start();
            if let Some(rest) = rest.strip_prefix(':') {
                let rest = rest.trim_start();
                if rest.starts_with("\"Feature\"") {
                    lines.push(line);
                }
            }
        }
        i += 1;
    }
    lines
}

fn parse_ring(v: &Value) -> std::result::Result<Vec<Point2<f64>>, String> {
    let arr = v.as_array().ok_or("ring is not an array")?;
    let mut pts = Vec::with_capacity(arr.len());
    for c in arr {
        let xy = c.as_array().filter(|a| a.len() >= 2).ok_or("position needs two numbers")?;
        let x = xy[0].as_f64().ok_or("coordinate is not a number")?;
        let y = xy[1].as_f64().ok_or("coordinate is not a number")?;
        if !x.is_finite() || !y.is_finite() {
            return Err("non-finite coordinate".into());
        }
        pts.push(Point2::new(x, y));
    }
    if pts.len() < 2 || pts.first() != pts.last() {
        return Err("ring is not closed".into());
    }
    pts.pop();
    pts.dedup();
    if pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    if pts.len() < 3 {
        return Err(format!("ring has only {} distinct vertices", pts.len()));
    }
    Ok(pts)
}

fn parse_feature(f: &Value) -> std::result::Result<Footprint, (Option<String>, String)> {
    let id = match f.get("properties").and_then(|p| p.get("id")) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err((None, "missing \"id\" property".into())),
    };
    let fail = |r: String| (Some(id.clone()), r);
    let geom = f.get("geometry").ok_or_else(|| fail("missing geometry".into()))?;
    let coords = match geom.get("type").and_then(Value::as_str) {
        Some("Polygon") => geom.get("coordinates"),
        Some("MultiPolygon") => match geom.get("coordinates").and_then(Value::as_array) {
            Some(parts) if parts.len() == 1 => parts.first(),
            _ => return Err(fail("MultiPolygon must have exactly one part".into())),
        },
        other => return Err(fail(format!("unsupported geometry type {other:?}"))),
    };
    let rings = coords
        .and_then(Value::as_array)
        .filter(|r| !r.is_empty())
        .ok_or_else(|| fail("polygon without rings".into()))?;
    let outer = parse_ring(&rings[0]).map_err(fail)?;
    let holes = rings[1..]
        .iter()
        .map(parse_ring)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(fail)?;
    Footprint::new(id.clone(), outer, holes).map_err(|e| fail(e.to_string()))
}

/// Parses a GeoJSON FeatureCollection, returning valid footprints and a list
/// of per-feature problems. Only document-level problems are errors.
pub fn parse_footprints(text: &str, name: &str) -> Result<(Vec<Footprint>, Vec<FootprintIssue>)> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::parse(name, e.line(), e.to_string()))?;
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::parse(name, 1, "expected a FeatureCollection"));
    }
    let features = doc
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::parse(name, 1, "missing features array"))?;
    let lines = feature_lines(text);
    let mut ok = Vec::new();
    let mut issues = Vec::new();
    for (i, f) in features.iter().enumerate() {
        match parse_feature(f) {
            Ok(fp) => ok.push(fp),
            Err((id, reason)) => issues.push(FootprintIssue {
                index: i,
                id,
                line: lines.get(i).copied().unwrap_or(1),
                reason,
            }),
        }
    }
    Ok((ok, issues))
}

/// Strict loader: any malformed feature is a parse error.
pub fn load_footprints(path: &Path) -> Result<Vec<Footprint>> {
    let (fps, issues) = load_footprints_lenient(path)?;
    if let Some(i) = issues.into_iter().next() {
        let what = i.id.map(|id| format!("feature {id}: ")).unwrap_or_default();
        return Err(Error::parse(path.display().to_string(), i.line, format!("{what}{}", i.reason)));
    }
    Ok(fps)
}

pub fn load_footprints_lenient(path: &Path) -> Result<(Vec<Footprint>, Vec<FootprintIssue>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_footprints(&text, &path.display().to_string())
}

fn closed(ring: &[Point2<f64>]) -> Value {
    let mut c: Vec<Value> = ring.iter().map(|p| serde_json::json!([p.x, p.y])).collect();
    c.push(c[0].clone());
    Value::Array(c)
}

/// FeatureCollection of Polygon features with an `id` property.
pub fn footprints_geojson(footprints: &[Footprint]) -> Value {
    let features: Vec<Value> = footprints
        .iter()
        .map(|f| {
            let rings: Vec<Value> = f.polygon.rings().map(|r| closed(r)).collect();
            serde_json::json!({
                "type": "Feature",
                "properties": { "id": f.id },
                "geometry": { "type": "Polygon", "coordinates": rings }
            })
        })
        .collect();
    serde_json::json!({ "type": "FeatureCollection", "features": features })
}

pub fn write_footprints(path: &Path, footprints: &[Footprint]) -> Result<()> {
    let text = serde_json::to_string_pretty(&footprints_geojson(footprints)).expect("json value serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fc(coords: &str) -> String {
        format!(
            r#"{{"type": "FeatureCollection", "features": [
  {{"type": "Feature", "properties": {{"id": "b1"}},
    "geometry": {{"type": "Polygon", "coordinates": {coords}}}}}
]}}"#
        )
    }

    #[test]
    fn clockwise_ring_is_normalized() {
        let text = fc("[[[0,0],[0,1],[1,1],[1,0],[0,0]]]");
        let (fps, issues) = parse_footprints(&text, "t").unwrap();
        assert!(issues.is_empty());
        assert!(crate::geom::signed_area(fps[0].outer()) > 0.0);
        assert_eq!(fps[0].area(), 1.0);
    }

    #[test]
    fn degenerate_ring_reports_line() {
        let text = fc("[[[0,0],[1,0],[0,0]]]");
        let (_, issues) = parse_footprints(&text, "t").unwrap();
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].line, 2);
        assert!(issues[0].reason.contains("distinct"));
    }

    #[test]
    fn open_ring_is_rejected() {
        let text = fc("[[[0,0],[1,0],[1,1],[0,1]]]");
        let (fps, issues) = parse_footprints(&text, "t").unwrap();
        assert!(fps.is_empty());
        assert!(issues[0].reason.contains("closed"));
    }

    #[test]
    fn hole_must_be_inside() {
        let text = fc("[[[0,0],[4,0],[4,4],[0,4],[0,0]],[[3,3],[5,3],[5,5],[3,5],[3,3]]]");
        let (_, issues) = parse_footprints(&text, "t").unwrap();
        assert!(issues[0].reason.contains("hole"));
    }

    #[test]
    fn strict_loader_errors_with_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.geojson");
        fs::write(&p, fc("[[[0,0],[1,1],[0,0]]]")).unwrap();
        match load_footprints(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn geojson_round_trip() {
        let hole = vec![Point2::new(2.0, 2.0), Point2::new(2.0, 4.0), Point2::new(4.0, 4.0), Point2::new(4.0, 2.0)];
        let sq = vec![Point2::new(0.0, 0.0), Point2::new(10.0, 0.0), Point2::new(10.0, 10.0), Point2::new(0.0, 10.0)];
        let f = Footprint::new("a", sq, vec![hole]).unwrap();
        let text = serde_json::to_string(&footprints_geojson(&[f.clone()])).unwrap();
        let (back, issues) = parse_footprints(&text, "mem").unwrap();
        assert!(issues.is_empty());
        assert_eq!(back, vec![f]);
    }
}
