//! Batch orchestration: per-building reconstruction over a worker pool, and
//! batch evaluation against reference models.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::cropper::crop_building;
use crate::evaluate::{aggregate, aggregate_csv, evaluate_building, Aggregate, EvalReport};
use crate::geodata::{
    load_footprints_lenient, load_mosaic, load_pointcloud, merge_adjacent_footprints, read_world_file, Footprint,
    Mosaic, PointCloud, PointIndex, TileEntry,
};
use crate::geom::{Point2, Segment2};
use crate::georef_filter::{buffer_footprint_with, clip_segments, georeference, read_rooflines, write_rooflines, GeoSegment};
use crate::kinetic::{extend_segments, rectangle, write_debug};
use crate::linedetect::{detect_segments, gradient_field, write_segments_csv};
use crate::reconstruct::{
    assign_and_fit, base_elevation, export_model, extrude_solid, merge_cells_elevation_prior, partition_footprint,
    read_model, SolidModel,
};
use crate::regularize::regularize_segments;
use crate::{Error, Result};

/// Seconds spent in each per-building stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub crop: f64,
    pub detect: f64,
    pub regularize: f64,
    pub kinetic: f64,
    pub filter: f64,
    pub reconstruct: f64,
    pub export: f64,
}

impl StageTimes {
    fn add(&mut self, o: &StageTimes) {
        self.crop += o.crop;
        self.detect += o.detect;
        self.regularize += o.regularize;
        self.kinetic += o.kinetic;
        self.filter += o.filter;
        self.reconstruct += o.reconstruct;
        self.export += o.export;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildingOutcome {
    pub id: String,
    pub ok: bool,
    pub error: Option<String>,
    pub faces: Option<usize>,
    pub model: Option<PathBuf>,
    pub seconds: f64,
    pub stages: StageTimes,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub workers: usize,
    pub buildings: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub load_seconds: f64,
    pub process_seconds: f64,
    pub wall_seconds: f64,
    pub buildings_per_second: f64,
    pub stage_totals: StageTimes,
    pub outcomes: Vec<BuildingOutcome>,
}

/// Everything a run reads before processing buildings.
pub struct Inputs {
    pub mosaic: Mosaic,
    pub footprints: Vec<Footprint>,
    /// Features that could not be read, as `(label, reason)`.
    pub rejected: Vec<(String, String)>,
    pub cloud: PointCloud,
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Config(format!("{key} is not set")))
}

fn existing<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    let path = required(p, key)?;
    if !path.exists() {
        return Err(Error::Config(format!("{key}: {} does not exist", path.display())));
    }
    Ok(path)
}

pub fn load_inputs(cfg: &Config) -> Result<Inputs> {
    let i = &cfg.input;
    let index = existing(&i.mosaic_index, "input.mosaic_index")?;
    let dir = match &i.mosaic_dir {
        Some(_) => existing(&i.mosaic_dir, "input.mosaic_dir")?.to_path_buf(),
        None => index.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let fp_path = existing(&i.footprints, "input.footprints")?;
    let cloud_path = existing(&i.pointcloud, "input.pointcloud")?;

    let mosaic = load_mosaic(&dir, index)?;
    let (raw, issues) = load_footprints_lenient(fp_path)?;
    let rejected = issues
        .into_iter()
        .map(|i| {
            let label = i.id.unwrap_or_else(|| format!("feature #{}", i.index));
            warn!("skipping footprint {label} (line {}): {}", i.line, i.reason);
            (label, format!("line {}: {}", i.line, i.reason))
        })
        .collect();
    let footprints = merge_adjacent_footprints(&raw, cfg.footprints.gap_tol)?;
    let cloud = load_pointcloud(cloud_path)?;
    Ok(Inputs { mosaic, footprints, rejected, cloud })
}

/// File-system safe version of a building id.
pub fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

/// Points whose planimetric position is within `radius` of the footprint's
/// bounding box, in cloud order.
fn local_cloud(fp: &Footprint, cloud: &PointCloud, index: &PointIndex, radius: f64) -> PointCloud {
    let (lo, hi) = fp.polygon.bbox();
    let r = Point2::new(radius, radius);
    let idx = index.query(cloud, lo - r, hi + r);
    PointCloud { points: idx.into_iter().map(|i| cloud.points[i]).collect() }
}

pub struct BuildingResult {
    pub solid: SolidModel,
    pub rooflines: Vec<GeoSegment>,
    pub stages: StageTimes,
}

fn lap(t: &mut Instant) -> f64 {
    let now = Instant::now();
    let s = (now - *t).as_secs_f64();
    *t = now;
    s
}

/// Crop, detect, regularize, extend, filter and reconstruct one building.
pub fn process_building(fp: &Footprint, mosaic: &Mosaic, cloud: &PointCloud, cfg: &Config, debug: Option<&Path>) -> Result<BuildingResult> {
    let mut st = StageTimes::default();
    let mut t = Instant::now();
    let crop = crop_building(fp, mosaic, cfg.crop.margin)?;
    if let Some(d) = debug {
        crop.write_debug_pgm(d)?;
    }
    st.crop = lap(&mut t);

    let field = gradient_field(&crop.image, cfg.detect.rho)?;
    let detected = detect_segments(&field, &cfg.detect.params());
    if let Some(d) = debug {
        write_segments_csv(&d.join("detected.csv"), &detected)?;
    }
    st.detect = lap(&mut t);

    let regular = regularize_segments(&detected, cfg.regularize.theta_par_deg.to_radians(), cfg.regularize.delta_col);
    if let Some(d) = debug {
        write_segments_csv(&d.join("regularized.csv"), &regular)?;
    }
    st.regularize = lap(&mut t);

    let (w, h) = (crop.image.width as f64, crop.image.height as f64);
    let extended = extend_segments(&regular, &rectangle(w, h), cfg.kinetic.max_crossings.0);
    if let Some(d) = debug {
        write_debug(d, "kinetic", &regular, &extended, w, h)?;
    }
    st.kinetic = lap(&mut t);

    let buffer = buffer_footprint_with(fp, cfg.filter.buffer_px, cfg.filter.chords_per_corner, &crop)?;
    let clipped = clip_segments(&extended, &buffer, cfg.filter.mode);
    let rooflines = georeference(&clipped, &crop);
    if let Some(d) = debug {
        write_rooflines(&d.join("rooflines.geojson"), &rooflines)?;
    }
    st.filter = lap(&mut t);

    let r = &cfg.reconstruct;
    let mut part = partition_footprint(fp, &rooflines, r.snap_tol)?;
    assign_and_fit(&mut part, cloud, r.min_points)?;
    merge_cells_elevation_prior(&mut part, cloud, &r.merge_params());
    let base = match r.base_elevation {
        Some(b) => b,
        None => {
            let radius = r.base_buffer_px * mosaic.transform.pixel_size;
            base_elevation(fp, cloud, radius, r.base_percentile / 100.0)?
                .ok_or_else(|| Error::Reconstruction(format!("building {}: no points for the base elevation", fp.id)))?
        }
    };
    let solid = extrude_solid(&part, base)?;
    st.reconstruct = lap(&mut t);
    Ok(BuildingResult { solid, rooflines, stages: st })
}

fn write_outputs(res: &BuildingResult, stem: &str, cfg: &Config) -> Result<PathBuf> {
    let models = cfg.output.dir.join("models");
    let path = models.join(format!("{stem}.{}", cfg.output.format.extension()));
    export_model(&res.solid, cfg.output.format, &path)?;
    if cfg.output.write_rooflines {
        write_rooflines(&cfg.output.dir.join("rooflines").join(format!("{stem}.geojson")), &res.rooflines)?;
    }
    Ok(path)
}

fn run_one(fp: &Footprint, inputs: &Inputs, index: &PointIndex, cfg: &Config, debug_root: Option<&Path>) -> BuildingOutcome {
    let start = Instant::now();
    let stem = file_stem(&fp.id);
    let radius = cfg.reconstruct.base_buffer_px.max(cfg.filter.buffer_px) * inputs.mosaic.transform.pixel_size + 1.0;
    let cloud = local_cloud(fp, &inputs.cloud, index, radius);
    let attempt = || -> Result<(BuildingResult, PathBuf)> {
        let debug = match debug_root {
            Some(root) => {
                let d = root.join(&stem);
                fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
                Some(d)
            }
            None => None,
        };
        let mut res = process_building(fp, &inputs.mosaic, &cloud, cfg, debug.as_deref())?;
        let t = Instant::now();
        let path = write_outputs(&res, &stem, cfg)?;
        res.stages.export = t.elapsed().as_secs_f64();
        Ok((res, path))
    };
    match attempt() {
        Ok((res, path)) => {
            info!("building {}: {} faces", fp.id, res.solid.face_count());
            BuildingOutcome {
                id: fp.id.clone(),
                ok: true,
                error: None,
                faces: Some(res.solid.face_count()),
                model: Some(path),
                seconds: start.elapsed().as_secs_f64(),
                stages: res.stages,
            }
        }
        Err(e) => {
            warn!("building {} failed: {e}", fp.id);
            BuildingOutcome {
                id: fp.id.clone(),
                ok: false,
                error: Some(e.to_string()),
                faces: None,
                model: None,
                seconds: start.elapsed().as_secs_f64(),
                stages: StageTimes::default(),
            }
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs the whole batch on already loaded inputs and writes `summary.json`.
pub fn run_batch(cfg: &Config, inputs: &Inputs, workers: usize, load_seconds: f64) -> Result<RunSummary> {
    let out = &cfg.output.dir;
    for d in [out.join("models"), out.join("rooflines")] {
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let debug = cfg.output.debug_dir.as_deref();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    let start = Instant::now();
    let index = PointIndex::build(&inputs.cloud, 4.0);
    let mut outcomes: Vec<BuildingOutcome> =
        pool.install(|| inputs.footprints.par_iter().map(|fp| run_one(fp, inputs, &index, cfg, debug)).collect());
    let process_seconds = start.elapsed().as_secs_f64();
    for (label, reason) in &inputs.rejected {
        outcomes.push(BuildingOutcome {
            id: label.clone(),
            ok: false,
            error: Some(format!("unreadable footprint, {reason}")),
            faces: None,
            model: None,
            seconds: 0.0,
            stages: StageTimes::default(),
        });
    }
    let mut totals = StageTimes::default();
    for o in &outcomes {
        totals.add(&o.stages);
    }
    let succeeded = outcomes.iter().filter(|o| o.ok).count();
    let summary = RunSummary {
        workers,
        buildings: outcomes.len(),
        succeeded,
        failed: outcomes.len() - succeeded,
        load_seconds,
        process_seconds,
        wall_seconds: load_seconds + process_seconds,
        buildings_per_second: if process_seconds > 0.0 { inputs.footprints.len() as f64 / process_seconds } else { 0.0 },
        stage_totals: totals,
        outcomes,
    };
    let path = out.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary).expect("summary serializes")).map_err(|e| Error::io(&path, e))?;
    info!(
        "{} of {} buildings reconstructed in {:.2} s ({:.1} buildings/s)",
        summary.succeeded, summary.buildings, summary.wall_seconds, summary.buildings_per_second
    );
    Ok(summary)
}

/// Loads inputs and runs the batch. Errors are setup problems; per-building
/// failures are recorded in the summary.
pub fn run_pipeline(cfg: &Config, workers: Option<usize>) -> Result<RunSummary> {
    let workers = workers.or(cfg.run.workers).unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(Error::Config("workers must be positive".into()));
    }
    let t = Instant::now();
    let inputs = load_inputs(cfg)?;
    run_batch(cfg, &inputs, workers, t.elapsed().as_secs_f64())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub reports: Vec<EvalReport>,
    /// Candidate ids with no reference model.
    pub unmatched: Vec<String>,
    /// Reference ids with no candidate model.
    pub missing: Vec<String>,
    /// Matched buildings whose evaluation failed, with the reason.
    pub failures: Vec<(String, String)>,
    pub aggregate: Aggregate,
}

fn model_files(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        let stem = name.strip_suffix(".city.json").or_else(|| name.strip_suffix(".obj"));
        if let Some(stem) = stem {
            out.insert(stem.to_string(), path.clone());
        }
    }
    Ok(out)
}

fn eval_pixel_size(cfg: &Config) -> Result<f64> {
    if let Some(s) = cfg.eval.pixel_size {
        return Ok(s);
    }
    let index = existing(&cfg.input.mosaic_index, "eval.pixel_size or input.mosaic_index")?;
    let text = fs::read_to_string(index).map_err(|e| Error::io(index, e))?;
    let entries: Vec<TileEntry> =
        serde_json::from_str(&text).map_err(|e| Error::parse(index.display().to_string(), e.line(), e.to_string()))?;
    let first = entries.first().ok_or_else(|| Error::Config("mosaic index lists no tiles".into()))?;
    let dir = cfg.input.mosaic_dir.clone().unwrap_or_else(|| index.parent().map(Path::to_path_buf).unwrap_or_default());
    Ok(read_world_file(&dir.join(&first.file).with_extension("wld"))?.pixel_size)
}

fn segments_of(lines: &[GeoSegment]) -> Vec<Segment2<f64>> {
    lines.iter().map(GeoSegment::segment).collect()
}

/// Evaluates every candidate model against the reference with the same id
/// and writes per-building JSON reports, `aggregate.csv` and
/// `eval_summary.json`.
pub fn run_eval(cfg: &Config) -> Result<EvalSummary> {
    let e = &cfg.eval;
    let cand_dir = existing(&e.candidates, "eval.candidates")?;
    let ref_dir = existing(&e.references, "eval.references")?;
    let report_dir = e.report_dir.clone().unwrap_or_else(|| cfg.output.dir.join("eval"));
    fs::create_dir_all(&report_dir).map_err(|err| Error::io(&report_dir, err))?;
    let params = e.params(eval_pixel_size(cfg)?);

    let cands = model_files(cand_dir)?;
    let refs = model_files(ref_dir)?;
    let mut truth_lines: BTreeMap<String, Vec<GeoSegment>> = BTreeMap::new();
    if e.reference_rooflines.is_some() {
        for s in read_rooflines(existing(&e.reference_rooflines, "eval.reference_rooflines")?)? {
            truth_lines.entry(file_stem(&s.source_building)).or_default().push(s);
        }
    }
    let unmatched: Vec<String> = cands.keys().filter(|k| !refs.contains_key(*k)).cloned().collect();
    let missing: Vec<String> = refs.keys().filter(|k| !cands.contains_key(*k)).cloned().collect();
    for id in &unmatched {
        warn!("candidate {id} has no reference model");
    }

    let matched: Vec<(&String, &PathBuf, &PathBuf)> =
        cands.iter().filter_map(|(id, c)| refs.get(id).map(|r| (id, c, r))).collect();
    let results: Vec<(String, Result<EvalReport>)> = matched
        .par_iter()
        .map(|&(id, c, r)| {
            let run = || -> Result<EvalReport> {
                let cand = read_model(c)?;
                let reference = read_model(r)?;
                let truth = truth_lines.get(id).map(|l| segments_of(l)).unwrap_or_default();
                let extracted = match &e.extracted_rooflines {
                    Some(dir) if !truth.is_empty() => {
                        let p = dir.join(format!("{id}.geojson"));
                        if p.is_file() { segments_of(&read_rooflines(&p)?) } else { Vec::new() }
                    }
                    _ => Vec::new(),
                };
                let lines = (!truth.is_empty()).then_some((extracted.as_slice(), truth.as_slice()));
                let mut report = evaluate_building(&cand, &reference, lines, &params)?;
                report.building_id = id.clone();
                Ok(report)
            };
            (id.clone(), run())
        })
        .collect();

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(rep) => {
                let path = report_dir.join(format!("{id}.json"));
                fs::write(&path, serde_json::to_string_pretty(&rep).expect("report serializes"))
                    .map_err(|err| Error::io(&path, err))?;
                reports.push(rep);
            }
            Err(err) => {
                warn!("evaluation of {id} failed: {err}");
                failures.push((id, err.to_string()));
            }
        }
    }
    let agg = aggregate(&reports);
    let csv = report_dir.join("aggregate.csv");
    fs::write(&csv, aggregate_csv(&agg)).map_err(|err| Error::io(&csv, err))?;
    let summary = EvalSummary { reports, unmatched, missing, failures, aggregate: agg };
    let path = report_dir.join("eval_summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary).expect("summary serializes")).map_err(|err| Error::io(&path, err))?;
    Ok(summary)
}
