//! Synthetic scenes with known truth: parametric buildings rendered into a
//! tiled orthophoto, plus footprints, a point cloud, truth rooflines and
//! truth solids.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geodata::{write_footprints, write_pointcloud, write_world_file, Footprint, GrayImage, PointCloud, TileEntry, WorldTransform};
use crate::geom::{interior_point, Point2, Point3, Segment2};
use crate::georef_filter::{write_rooflines, GeoSegment};
use crate::reconstruct::{export_model, extrude_solid, partition_footprint, ModelFormat, RoofPlane, SolidModel, DEFAULT_SNAP_TOL};
use crate::{Error, Result};

/// Minimum grey-level contrast between neighbouring roof parts and between
/// roofs and ground.
pub const MIN_CONTRAST: u8 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoofShape {
    /// One flat roof.
    Flat,
    /// Two flat halves split across x at mid-width.
    Step,
    /// Ridge along x at mid-depth; `heights = [eave, ridge]`.
    Gable,
    /// Full-width bar along the south side plus a west wing; one flat roof
    /// when one height is given, two otherwise.
    #[serde(rename = "L")]
    L,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingSpec {
    pub id: String,
    pub shape: RoofShape,
    /// South-west corner of the bounding box (world metres).
    pub origin: [f64; 2],
    /// Extent along x.
    pub width: f64,
    /// Extent along y.
    pub depth: f64,
    pub heights: Vec<f64>,
    pub intensities: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub buildings: Vec<BuildingSpec>,
    pub pixel_size: f64,
    /// World position of the mosaic's top-left corner.
    pub origin: [f64; 2],
    pub tile_cols: usize,
    pub tile_rows: usize,
    pub tile_width: usize,
    pub tile_height: usize,
    pub noise_sigma: f64,
    pub ground_intensity: u8,
    pub points_per_m2: f64,
    /// Ground points are sampled this far around each building.
    pub ground_margin: f64,
    pub seed: u64,
}

/// One planar roof part: an axis-aligned rectangle.
#[derive(Clone, Debug)]
pub struct RoofPart {
    pub lo: Point2<f64>,
    pub hi: Point2<f64>,
    pub plane: RoofPlane<f64>,
    pub intensity: u8,
}

impl RoofPart {
    fn contains(&self, p: Point2<f64>) -> bool {
        p.x >= self.lo.x && p.x <= self.hi.x && p.y >= self.lo.y && p.y <= self.hi.y
    }
}

fn flat(h: f64) -> RoofPlane<f64> {
    RoofPlane { a: 0.0, b: 0.0, d: h, rms: 0.0 }
}

impl BuildingSpec {
    fn bbox(&self) -> (Point2<f64>, Point2<f64>) {
        let lo = Point2::new(self.origin[0], self.origin[1]);
        (lo, Point2::new(lo.x + self.width, lo.y + self.depth))
    }

    fn parts_needed(&self) -> (usize, usize) {
        match self.shape {
            RoofShape::Flat => (1, 1),
            RoofShape::Step | RoofShape::Gable => (2, 2),
            RoofShape::L => (self.heights.len().clamp(1, 2), self.heights.len().clamp(1, 2)),
        }
    }

    fn validate(&self) -> Result<()> {
        let fail = |r: String| Err(Error::Scene(format!("building {}: {r}", self.id)));
        if !(self.width > 0.0 && self.depth > 0.0) || !self.width.is_finite() || !self.depth.is_finite() {
            return fail("dimensions must be positive".into());
        }
        let (nh, ni) = self.parts_needed();
        if self.heights.len() != nh && !(self.shape == RoofShape::L && self.heights.len() == 2) {
            return fail(format!("expected {nh} heights, got {}", self.heights.len()));
        }
        if self.intensities.len() < ni {
            return fail(format!("expected {ni} intensities, got {}", self.intensities.len()));
        }
        if self.heights.iter().any(|h| !(*h > 0.0)) {
            return fail("heights must be positive".into());
        }
        if self.shape == RoofShape::Gable && !(self.heights[1] > self.heights[0]) {
            return fail("ridge must be above the eaves".into());
        }
        if ni == 2 && self.intensities[0].abs_diff(self.intensities[1]) < MIN_CONTRAST {
            return fail(format!("roof parts need intensities at least {MIN_CONTRAST} apart"));
        }
        Ok(())
    }

    pub fn parts(&self) -> Vec<RoofPart> {
        let (lo, hi) = self.bbox();
        let (xm, ym) = ((lo.x + hi.x) * 0.5, (lo.y + hi.y) * 0.5);
        let h = &self.heights;
        let i = &self.intensities;
        let part = |lo, hi, plane, intensity| RoofPart { lo, hi, plane, intensity };
        match self.shape {
            RoofShape::Flat => vec![part(lo, hi, flat(h[0]), i[0])],
            RoofShape::Step => vec![
                part(lo, Point2::new(xm, hi.y), flat(h[0]), i[0]),
                part(Point2::new(xm, lo.y), hi, flat(h[1]), i[1]),
            ],
            RoofShape::Gable => {
                let slope = (h[1] - h[0]) / (ym - lo.y);
                vec![
                    part(lo, Point2::new(hi.x, ym), RoofPlane { a: 0.0, b: slope, d: h[0] - slope * lo.y, rms: 0.0 }, i[0]),
                    part(Point2::new(lo.x, ym), hi, RoofPlane { a: 0.0, b: -slope, d: h[0] + slope * hi.y, rms: 0.0 }, i[1]),
                ]
            }
            RoofShape::L => {
                let (h1, i1) = if h.len() == 2 { (h[1], i[1]) } else { (h[0], i[0]) };
                vec![
                    part(lo, Point2::new(hi.x, ym), flat(h[0]), i[0]),
                    part(Point2::new(lo.x, ym), Point2::new(xm, hi.y), flat(h1), i1),
                ]
            }
        }
    }

    pub fn footprint(&self) -> Result<Footprint> {
        let (lo, hi) = self.bbox();
        let outer = match self.shape {
            RoofShape::L => {
                let (xm, ym) = ((lo.x + hi.x) * 0.5, (lo.y + hi.y) * 0.5);
                vec![lo, Point2::new(hi.x, lo.y), Point2::new(hi.x, ym), Point2::new(xm, ym), Point2::new(xm, hi.y), Point2::new(lo.x, hi.y)]
            }
            _ => vec![lo, Point2::new(hi.x, lo.y), hi, Point2::new(lo.x, hi.y)],
        };
        Footprint::new(self.id.clone(), outer, vec![])
    }

    /// Interior boundaries between roof parts with different planes.
    pub fn truth_rooflines(&self) -> Vec<GeoSegment> {
        let (lo, hi) = self.bbox();
        let (xm, ym) = ((lo.x + hi.x) * 0.5, (lo.y + hi.y) * 0.5);
        let seg = |a: Point2<f64>, b: Point2<f64>| GeoSegment { g0: a, g1: b, source_building: self.id.clone() };
        match self.shape {
            RoofShape::Flat => vec![],
            RoofShape::Step if self.heights[0] == self.heights[1] => vec![],
            RoofShape::Step => vec![seg(Point2::new(xm, lo.y), Point2::new(xm, hi.y))],
            RoofShape::Gable => vec![seg(Point2::new(lo.x, ym), Point2::new(hi.x, ym))],
            RoofShape::L if self.heights.len() == 2 && self.heights[0] != self.heights[1] => {
                vec![seg(Point2::new(lo.x, ym), Point2::new(xm, ym))]
            }
            RoofShape::L => vec![],
        }
    }

    /// Truth solid from exact parts, through the regular extrusion kernel.
    pub fn truth_solid(&self, base: f64) -> Result<SolidModel> {
        let fp = self.footprint()?;
        let mut part = partition_footprint(&fp, &self.truth_rooflines(), DEFAULT_SNAP_TOL)?;
        let roofs = self.parts();
        for c in 0..part.cells.len() {
            let p = interior_point(&part.cell_rings(c))
                .ok_or_else(|| Error::Scene(format!("building {}: degenerate cell", self.id)))?;
            let roof = roofs
                .iter()
                .find(|r| r.contains(p))
                .ok_or_else(|| Error::Scene(format!("building {}: cell outside every roof part", self.id)))?;
            part.cells[c].plane = Some(roof.plane);
        }
        extrude_solid(&part, base)
    }
}

impl SceneSpec {
    /// Four buildings, one of each shape, on a 2x2 tile grid with tile seams
    /// running through two of them.
    pub fn four_shapes(noise_sigma: f64) -> Self {
        let b = |id: &str, shape, origin, width, depth, heights: &[f64], intensities: &[u8]| BuildingSpec {
            id: id.into(),
            shape,
            origin,
            width,
            depth,
            heights: heights.to_vec(),
            intensities: intensities.to_vec(),
        };
        Self {
            buildings: vec![
                b("flat", RoofShape::Flat, [1010.0, 1025.0], 10.0, 10.0, &[3.0], &[200]),
                b("step", RoofShape::Step, [1034.0, 1033.0], 10.0, 10.0, &[3.0, 6.0], &[120, 200]),
                b("gable", RoofShape::Gable, [1010.0, 1003.0], 12.0, 10.0, &[3.0, 6.0], &[110, 210]),
                b("L", RoofShape::L, [1035.0, 1002.0], 14.0, 12.0, &[4.0, 7.0], &[130, 220]),
            ],
            pixel_size: 0.1,
            origin: [1000.0, 1050.0],
            tile_cols: 2,
            tile_rows: 2,
            tile_width: 300,
            tile_height: 250,
            noise_sigma,
            ground_intensity: 40,
            points_per_m2: 4.0,
            ground_margin: 8.0,
            seed: 42,
        }
    }

    /// `n` buildings cycling through the four shapes on a regular grid.
    pub fn grid(n: usize, noise_sigma: f64) -> Self {
        let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
        let rows = n.div_ceil(cols).max(1);
        let pitch = 25.0;
        let shapes = [
            (RoofShape::Flat, vec![3.0], vec![200]),
            (RoofShape::Step, vec![3.0, 6.0], vec![120, 200]),
            (RoofShape::Gable, vec![3.0, 6.0], vec![110, 210]),
            (RoofShape::L, vec![4.0, 7.0], vec![130, 220]),
        ];
        let origin = [0.0, rows as f64 * pitch];
        let buildings = (0..n)
            .map(|k| {
                let (shape, heights, intensities) = shapes[k % 4].clone();
                let (c, r) = (k % cols, k / cols);
                BuildingSpec {
                    id: format!("b{k:04}"),
                    shape,
                    origin: [c as f64 * pitch + 7.5, r as f64 * pitch + 7.5],
                    width: 10.0,
                    depth: 10.0,
                    heights,
                    intensities,
                }
            })
            .collect();
        let px = (pitch / 0.1) as usize;
        Self {
            buildings,
            pixel_size: 0.1,
            origin,
            tile_cols: 2,
            tile_rows: 2,
            tile_width: (cols * px).div_ceil(2),
            tile_height: (rows * px).div_ceil(2),
            noise_sigma,
            ground_intensity: 40,
            points_per_m2: 4.0,
            ground_margin: 8.0,
            seed: 42,
        }
    }

    pub fn transform(&self) -> WorldTransform<f64> {
        WorldTransform { origin_x: self.origin[0], origin_y: self.origin[1], pixel_size: self.pixel_size }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pixel_size > 0.0) || self.tile_cols == 0 || self.tile_rows == 0 || self.tile_width == 0 || self.tile_height == 0 {
            return Err(Error::Scene("pixel size and tile grid must be positive".into()));
        }
        if !(self.points_per_m2 > 0.0) || !(self.noise_sigma >= 0.0) || !(self.ground_margin >= 0.0) {
            return Err(Error::Scene("sampling parameters must be positive".into()));
        }
        let mut ids = BTreeSet::new();
        for b in &self.buildings {
            b.validate()?;
            if !ids.insert(&b.id) {
                return Err(Error::Scene(format!("duplicate building id {}", b.id)));
            }
            if b.intensities.iter().any(|i| i.abs_diff(self.ground_intensity) < MIN_CONTRAST) {
                return Err(Error::Scene(format!("building {}: roof too close to ground intensity", b.id)));
            }
        }
        for (i, a) in self.buildings.iter().enumerate() {
            let (alo, ahi) = a.bbox();
            for b in &self.buildings[i + 1..] {
                let (blo, bhi) = b.bbox();
                if alo.x < bhi.x && blo.x < ahi.x && alo.y < bhi.y && blo.y < ahi.y {
                    return Err(Error::Scene(format!("buildings {} and {} overlap", a.id, b.id)));
                }
            }
        }
        Ok(())
    }

    /// Whole-mosaic image, flat shaded by pixel centre.
    pub fn render(&self) -> GrayImage {
        let (w, h) = (self.tile_cols * self.tile_width, self.tile_rows * self.tile_height);
        let t = self.transform();
        let mut img = GrayImage::filled(w, h, self.ground_intensity);
        for b in &self.buildings {
            let parts = b.parts();
            let (lo, hi) = b.bbox();
            let p0 = t.world_to_pixel(Point2::new(lo.x, hi.y));
            let p1 = t.world_to_pixel(Point2::new(hi.x, lo.y));
            let x0 = p0.x.floor().max(0.0) as usize;
            let y0 = p0.y.floor().max(0.0) as usize;
            let x1 = (p1.x.ceil().max(0.0) as usize).min(w);
            let y1 = (p1.y.ceil().max(0.0) as usize).min(h);
            for y in y0..y1 {
                for x in x0..x1 {
                    let c = t.pixel_to_world(Point2::new(x as f64 + 0.5, y as f64 + 0.5));
                    if let Some(p) = parts.iter().find(|p| p.contains(c)) {
                        img.set(x, y, p.intensity);
                    }
                }
            }
        }
        img
    }

    /// Roof samples on a regular grid with optional z noise, plus ground
    /// samples at z = 0 around every building.
    pub fn point_cloud(&self) -> Result<PointCloud> {
        let step = 1.0 / self.points_per_m2.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let noise = Normal::new(0.0, self.noise_sigma).map_err(|e| Error::Scene(e.to_string()))?;
        let mut z_noise = move || if self.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        let all_parts: Vec<RoofPart> = self.buildings.iter().flat_map(|b| b.parts()).collect();
        let mut grid = BTreeSet::new();
        for b in &self.buildings {
            let (lo, hi) = b.bbox();
            let m = self.ground_margin;
            let (i0, i1) = (((lo.x - m) / step).floor() as i64, ((hi.x + m) / step).ceil() as i64);
            let (j0, j1) = (((lo.y - m) / step).floor() as i64, ((hi.y + m) / step).ceil() as i64);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    grid.insert((j, i));
                }
            }
        }
        let mut pts = Vec::with_capacity(grid.len());
        for (j, i) in grid {
            // Offset by a quarter step so no sample sits on a part boundary.
            let q = Point2::new((i as f64 + 0.25) * step, (j as f64 + 0.25) * step);
            let z = all_parts.iter().find(|p| p.contains(q)).map_or(0.0, |p| p.plane.z_at(q));
            pts.push(Point3::new(q.x, q.y, z + z_noise()));
        }
        PointCloud::new(pts)
    }
}

/// Paths of everything `generate_scene` wrote.
#[derive(Clone, Debug)]
pub struct SceneFiles {
    pub root: PathBuf,
    pub tiles_dir: PathBuf,
    pub index: PathBuf,
    pub footprints: PathBuf,
    pub pointcloud: PathBuf,
    pub truth_rooflines: PathBuf,
    pub truth_dir: PathBuf,
    pub config: PathBuf,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Config for running the pipeline and evaluation on the scene, with paths
/// relative to the scene directory.
pub fn scene_config(spec: &SceneSpec) -> String {
    format!(
        r#"[input]
mosaic_dir = "tiles"
mosaic_index = "tiles/index.json"
footprints = "footprints.geojson"
pointcloud = "cloud.xyz"

[output]
dir = "out"
format = "obj"

[eval]
candidates = "out/models"
references = "truth"
extracted_rooflines = "out/rooflines"
reference_rooflines = "truth_rooflines.geojson"
report_dir = "out/eval"
pixel_size = {}
"#,
        spec.pixel_size
    )
}

pub fn generate_scene(spec: &SceneSpec, out_dir: &Path) -> Result<SceneFiles> {
    spec.validate()?;
    let files = SceneFiles {
        root: out_dir.to_path_buf(),
        tiles_dir: out_dir.join("tiles"),
        index: out_dir.join("tiles").join("index.json"),
        footprints: out_dir.join("footprints.geojson"),
        pointcloud: out_dir.join("cloud.xyz"),
        truth_rooflines: out_dir.join("truth_rooflines.geojson"),
        truth_dir: out_dir.join("truth"),
        config: out_dir.join("roofkit.toml"),
    };
    mkdir(&files.tiles_dir)?;
    mkdir(&files.truth_dir)?;

    let mosaic = spec.render();
    let t = spec.transform();
    let mut entries = Vec::new();
    for row in 0..spec.tile_rows {
        for col in 0..spec.tile_cols {
            let (x0, y0) = (col * spec.tile_width, row * spec.tile_height);
            let name = format!("tile_{col}_{row}.png");
            let path = files.tiles_dir.join(&name);
            mosaic.sub_image(x0, y0, spec.tile_width, spec.tile_height).write_png(&path)?;
            write_world_file(&path.with_extension("wld"), &t.shifted(x0 as f64, y0 as f64))?;
            entries.push(TileEntry { file: name, col, row });
        }
    }
    write(&files.index, &serde_json::to_string_pretty(&entries).expect("index serializes"))?;

    let footprints = spec.buildings.iter().map(BuildingSpec::footprint).collect::<Result<Vec<_>>>()?;
    write_footprints(&files.footprints, &footprints)?;
    write_pointcloud(&files.pointcloud, &spec.point_cloud()?)?;
    let truth: Vec<GeoSegment> = spec.buildings.iter().flat_map(BuildingSpec::truth_rooflines).collect();
    write_rooflines(&files.truth_rooflines, &truth)?;
    for b in &spec.buildings {
        let solid = b.truth_solid(0.0)?;
        export_model(&solid, ModelFormat::Obj, &files.truth_dir.join(format!("{}.obj", b.id)))?;
    }
    write(&out_dir.join("scene.json"), &serde_json::to_string_pretty(spec).expect("spec serializes"))?;
    write(&files.config, &scene_config(spec))?;
    Ok(files)
}

/// Truth rooflines of a scene as plain segments.
pub fn truth_segments(spec: &SceneSpec) -> Vec<Segment2<f64>> {
    spec.buildings.iter().flat_map(|b| b.truth_rooflines()).map(|g| g.segment()).collect()
}
