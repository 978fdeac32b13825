//! OBJ and CityJSON output (and the readers used for evaluation).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::solid::{newell, project_2d, Face, FaceRole, SolidModel};
use crate::geom::{Point2, Point3};
use crate::{Error, Result};

const CITYJSON_SCALE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFormat {
    #[default]
    Obj,
    CityJson,
}

impl ModelFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ModelFormat::Obj => "obj",
            ModelFormat::CityJson => "city.json",
        }
    }
}

fn segments_cross(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>, d: Point2<f64>) -> bool {
    let o = |p: Point2<f64>, q: Point2<f64>, r: Point2<f64>| (q - p).cross(r - p);
    let (d1, d2, d3, d4) = (o(a, b, c), o(a, b, d), o(c, d, a), o(c, d, b));
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Joins holes to the outer ring through bridge edges so that the face can
/// be written as a single polygon.
fn keyhole(vertices: &[Point3<f64>], face: &Face) -> Vec<usize> {
    let normal = newell(vertices, &face.rings);
    let plan = |i: usize| project_2d(&[vertices[i]], normal)[0];
    let mut ring = face.rings[0].clone();
    for hole in &face.rings[1..] {
        let edges: Vec<(usize, usize)> = face
            .rings
            .iter()
            .flat_map(|r| (0..r.len()).map(move |k| (r[k], r[(k + 1) % r.len()])))
            .collect();
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, &o) in ring.iter().enumerate() {
            for (j, &h) in hole.iter().enumerate() {
                let d = vertices[o].dist(vertices[h]);
                if best.is_some_and(|b| d >= b.0) {
                    continue;
                }
                let (po, ph) = (plan(o), plan(h));
                let blocked = edges.iter().any(|&(x, y)| {
                    x != o && y != o && x != h && y != h && segments_cross(po, ph, plan(x), plan(y))
                });
                if !blocked {
                    best = Some((d, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { continue };
        let mut merged: Vec<usize> = ring[..=i].to_vec();
        merged.extend(hole[j..].iter().chain(&hole[..=j]));
        merged.extend(&ring[i..]);
        ring = merged;
    }
    ring
}

pub fn to_obj(solid: &SolidModel) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# building {}", solid.building_id);
    let _ = writeln!(s, "o {}", solid.building_id);
    for v in &solid.vertices {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for role in [FaceRole::Roof, FaceRole::Wall, FaceRole::Floor] {
        let faces: Vec<&Face> = solid.faces.iter().filter(|f| f.role == role).collect();
        if faces.is_empty() {
            continue;
        }
        let _ = writeln!(s, "g {}", role.name());
        for f in faces {
            let ring = if f.rings.len() > 1 { keyhole(&solid.vertices, f) } else { f.rings[0].clone() };
            s.push('f');
            for i in ring {
                let _ = write!(s, " {}", i + 1);
            }
            s.push('\n');
        }
    }
    s
}

pub fn parse_obj(text: &str, name: &str) -> Result<SolidModel> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut role = FaceRole::Roof;
    let mut building_id = Path::new(name).file_name().and_then(|f| f.to_str()).unwrap_or(name).to_string();
    if let Some(stem) = building_id.strip_suffix(".obj") {
        building_id = stem.to_string();
    }
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        match it.next() {
            Some("o") => building_id = it.collect::<Vec<_>>().join(" "),
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|t| t.parse::<f64>().map_err(|e| Error::parse(name, ln + 1, e.to_string())))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(Error::parse(name, ln + 1, "vertex needs 3 coordinates"));
                }
                vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("g") => {
                role = match it.next() {
                    Some("wall") => FaceRole::Wall,
                    Some("floor") => FaceRole::Floor,
                    _ => FaceRole::Roof,
                }
            }
            Some("f") => {
                let ring: Vec<usize> = it
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or(t);
                        let i: i64 = head.parse().map_err(|_| Error::parse(name, ln + 1, format!("bad index {t}")))?;
                        let idx = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                        if idx < 0 || idx as usize >= vertices.len() {
                            return Err(Error::parse(name, ln + 1, format!("index {i} out of range")));
                        }
                        Ok(idx as usize)
                    })
                    .collect::<Result<_>>()?;
                if ring.len() < 3 {
                    return Err(Error::parse(name, ln + 1, "face needs at least 3 vertices"));
                }
                faces.push(Face { rings: vec![ring], role });
            }
            _ => {}
        }
    }
    Ok(SolidModel { building_id, vertices, faces })
}

pub fn cityjson_value(solid: &SolidModel) -> Value {
    let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for v in &solid.vertices {
        lo = Point3::new(lo.x.min(v.x), lo.y.min(v.y), lo.z.min(v.z));
    }
    if solid.vertices.is_empty() {
        lo = Point3::new(0.0, 0.0, 0.0);
    }
    let q = |v: f64, t: f64| ((v - t) / CITYJSON_SCALE).round() as i64;
    let verts: Vec<Value> = solid.vertices.iter().map(|v| json!([q(v.x, lo.x), q(v.y, lo.y), q(v.z, lo.z)])).collect();
    let shell: Vec<Value> = solid.faces.iter().map(|f| json!(f.rings)).collect();
    let values: Vec<usize> = solid
        .faces
        .iter()
        .map(|f| match f.role {
            FaceRole::Roof => 0,
            FaceRole::Wall => 1,
            FaceRole::Floor => 2,
        })
        .collect();
    json!({
        "type": "CityJSON",
        "version": "1.1",
        "transform": { "scale": [CITYJSON_SCALE, CITYJSON_SCALE, CITYJSON_SCALE], "translate": [lo.x, lo.y, lo.z] },
        "CityObjects": {
            solid.building_id.clone(): {
                "type": "Building",
                "geometry": [{
                    "type": "Solid",
                    "lod": "2",
                    "boundaries": [shell],
                    "semantics": {
                        "surfaces": [{ "type": "RoofSurface" }, { "type": "WallSurface" }, { "type": "GroundSurface" }],
                        "values": [values]
                    }
                }]
            }
        },
        "vertices": verts
    })
}

pub fn parse_cityjson(text: &str, name: &str) -> Result<SolidModel> {
    let bad = |reason: &str| Error::Load { what: name.to_string(), reason: reason.to_string() };
    let v: Value = serde_json::from_str(text).map_err(|e| bad(&e.to_string()))?;
    let scale: Vec<f64> = v["transform"]["scale"].as_array().map_or(vec![1.0; 3], |a| a.iter().filter_map(Value::as_f64).collect());
    let trans: Vec<f64> = v["transform"]["translate"].as_array().map_or(vec![0.0; 3], |a| a.iter().filter_map(Value::as_f64).collect());
    if scale.len() != 3 || trans.len() != 3 {
        return Err(bad("malformed transform"));
    }
    let vertices: Vec<Point3<f64>> = v["vertices"]
        .as_array()
        .ok_or_else(|| bad("missing vertices"))?
        .iter()
        .map(|c| {
            let g = |k: usize| c[k].as_f64().ok_or_else(|| bad("non-numeric vertex"));
            Ok(Point3::new(g(0)? * scale[0] + trans[0], g(1)? * scale[1] + trans[1], g(2)? * scale[2] + trans[2]))
        })
        .collect::<Result<_>>()?;
    let objects = v["CityObjects"].as_object().ok_or_else(|| bad("missing CityObjects"))?;
    let (building_id, obj) = objects.iter().next().ok_or_else(|| bad("no city object"))?;
    let geom = &obj["geometry"][0];
    let shell = geom["boundaries"][0].as_array().ok_or_else(|| bad("missing solid boundaries"))?;
    let surfaces = geom["semantics"]["surfaces"].as_array().cloned().unwrap_or_default();
    let values = geom["semantics"]["values"][0].as_array().cloned().unwrap_or_default();
    let mut faces = Vec::new();
    for (k, surf) in shell.iter().enumerate() {
        let rings: Vec<Vec<usize>> = serde_json::from_value(surf.clone()).map_err(|e| bad(&e.to_string()))?;
        if rings.iter().flatten().any(|&i| i >= vertices.len()) {
            return Err(bad("vertex index out of range"));
        }
        let role = values
            .get(k)
            .and_then(Value::as_u64)
            .and_then(|s| surfaces.get(s as usize))
            .and_then(|s| s["type"].as_str())
            .map_or(FaceRole::Roof, |t| match t {
                "WallSurface" => FaceRole::Wall,
                "GroundSurface" => FaceRole::Floor,
                _ => FaceRole::Roof,
            });
        faces.push(Face { rings, role });
    }
    Ok(SolidModel { building_id: building_id.clone(), vertices, faces })
}

pub fn export_model(solid: &SolidModel, format: ModelFormat, path: &Path) -> Result<()> {
    let text = match format {
        ModelFormat::Obj => to_obj(solid),
        ModelFormat::CityJson => serde_json::to_string(&cityjson_value(solid)).expect("json values serialize"),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads an `.obj` or `.city.json` / `.json` model.
pub fn read_model(path: &Path) -> Result<SolidModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    if name.ends_with(".json") {
        parse_cityjson(&text, &name)
    } else {
        parse_obj(&text, &name)
    }
}
