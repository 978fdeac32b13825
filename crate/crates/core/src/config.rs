//! Run configuration: one TOML file covering every tunable, each with its
//! default. Relative paths resolve against the config file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cropper::DEFAULT_MARGIN;
use crate::evaluate::{EvalParams, DEFAULT_DENSITY, DEFAULT_OFFSET_TOL_PX, DEFAULT_SAMPLE_STEP_PX, DEFAULT_SEED};
use crate::georef_filter::{ClipMode, CHORDS_PER_CORNER, DEFAULT_BUFFER_RADIUS};
use crate::linedetect::DetectParams;
use crate::reconstruct::{MergeParams, ModelFormat, DEFAULT_SNAP_TOL};
use crate::{Error, Result};

/// Crossing budget for kinetic extension: a count, or `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Crossings(pub Option<usize>);

impl Serialize for Crossings {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(k) => s.serialize_u64(k as u64),
            None => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Crossings {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(k) => Ok(Crossings(Some(k as usize))),
            Raw::S(s) if s == "inf" => Ok(Crossings(None)),
            Raw::S(s) => Err(serde::de::Error::custom(format!("expected a count or \"inf\", got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    pub mosaic_dir: Option<PathBuf>,
    pub mosaic_index: Option<PathBuf>,
    pub footprints: Option<PathBuf>,
    pub pointcloud: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: ModelFormat,
    pub debug_dir: Option<PathBuf>,
    pub write_rooflines: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), format: ModelFormat::Obj, debug_dir: None, write_rooflines: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FootprintConfig {
    /// Merge footprints whose boundaries are within this many metres.
    pub gap_tol: f64,
}

impl Default for FootprintConfig {
    fn default() -> Self {
        Self { gap_tol: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CropConfig {
    pub margin: usize,
}

impl Default for CropConfig {
    fn default() -> Self {
        Self { margin: DEFAULT_MARGIN }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectConfig {
    pub rho: f64,
    pub tau_deg: f64,
    pub min_length: f64,
    pub density_threshold: f64,
}

impl Default for DetectConfig {
    fn default() -> Self {
        let d = DetectParams::default();
        Self { rho: 5.0, tau_deg: d.tau.to_degrees(), min_length: d.min_length, density_threshold: d.density_threshold }
    }
}

impl DetectConfig {
    pub fn params(&self) -> DetectParams {
        DetectParams { tau: self.tau_deg.to_radians(), min_length: self.min_length, density_threshold: self.density_threshold }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularizeConfig {
    pub theta_par_deg: f64,
    pub delta_col: f64,
}

impl Default for RegularizeConfig {
    fn default() -> Self {
        Self { theta_par_deg: 5.0, delta_col: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KineticConfig {
    pub max_crossings: Crossings,
}

impl Default for KineticConfig {
    fn default() -> Self {
        Self { max_crossings: Crossings(Some(1)) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub buffer_px: f64,
    pub chords_per_corner: usize,
    pub mode: ClipMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { buffer_px: DEFAULT_BUFFER_RADIUS, chords_per_corner: CHORDS_PER_CORNER, mode: ClipMode::Clip }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructConfig {
    pub snap_tol: f64,
    pub min_points: usize,
    pub angle_tol_deg: f64,
    pub offset_tol: f64,
    /// Fixed base elevation; otherwise a percentile of nearby points.
    pub base_elevation: Option<f64>,
    pub base_percentile: f64,
    /// Radius, in pixels, of the neighbourhood used for the base percentile.
    pub base_buffer_px: f64,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        let m = MergeParams::default();
        Self {
            snap_tol: DEFAULT_SNAP_TOL,
            min_points: m.min_points,
            angle_tol_deg: m.angle_tol.to_degrees(),
            offset_tol: m.offset_tol,
            base_elevation: None,
            base_percentile: 5.0,
            base_buffer_px: DEFAULT_BUFFER_RADIUS,
        }
    }
}

impl ReconstructConfig {
    pub fn merge_params(&self) -> MergeParams {
        MergeParams { angle_tol: self.angle_tol_deg.to_radians(), offset_tol: self.offset_tol, min_points: self.min_points }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Worker threads; defaults to available parallelism.
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub candidates: Option<PathBuf>,
    pub references: Option<PathBuf>,
    /// Directory of `<id>.geojson` extracted rooflines.
    pub extracted_rooflines: Option<PathBuf>,
    /// One GeoJSON with every reference roofline, keyed by building.
    pub reference_rooflines: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
    pub offset_tol_px: f64,
    pub sample_step_px: f64,
    /// Metres per pixel for the tolerances above; read from the mosaic when
    /// absent.
    pub pixel_size: Option<f64>,
    pub density: f64,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            candidates: None,
            references: None,
            extracted_rooflines: None,
            reference_rooflines: None,
            report_dir: None,
            offset_tol_px: DEFAULT_OFFSET_TOL_PX,
            sample_step_px: DEFAULT_SAMPLE_STEP_PX,
            pixel_size: None,
            density: DEFAULT_DENSITY,
            seed: DEFAULT_SEED,
        }
    }
}

impl EvalConfig {
    pub fn params(&self, pixel_size: f64) -> EvalParams {
        EvalParams {
            offset_tol_px: self.offset_tol_px,
            sample_step_px: self.sample_step_px,
            pixel_size,
            density: self.density,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub input: InputConfig,
    pub output: OutputConfig,
    pub footprints: FootprintConfig,
    pub crop: CropConfig,
    pub detect: DetectConfig,
    pub regularize: RegularizeConfig,
    pub kinetic: KineticConfig,
    pub filter: FilterConfig,
    pub reconstruct: ReconstructConfig,
    pub run: RunConfig,
    pub eval: EvalConfig,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn resolve_opt(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(p) = p {
        resolve(base, p);
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Reads a config and makes its paths absolute relative to its own
    /// directory.
    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Config::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let i = &mut self.input;
        for p in [&mut i.mosaic_dir, &mut i.mosaic_index, &mut i.footprints, &mut i.pointcloud] {
            resolve_opt(base, p);
        }
        resolve(base, &mut self.output.dir);
        resolve_opt(base, &mut self.output.debug_dir);
        let e = &mut self.eval;
        for p in [&mut e.candidates, &mut e.references, &mut e.extracted_rooflines, &mut e.reference_rooflines, &mut e.report_dir] {
            resolve_opt(base, p);
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(format!("{what} out of range")));
        let d = &self.detect;
        if !(d.rho >= 0.0) || !(d.tau_deg > 0.0 && d.tau_deg <= 180.0) || !(d.min_length >= 0.0) {
            return bad("detect parameters");
        }
        if !(0.0..=1.0).contains(&d.density_threshold) {
            return bad("detect.density_threshold");
        }
        if !(self.regularize.theta_par_deg >= 0.0 && self.regularize.theta_par_deg < 45.0) || !(self.regularize.delta_col >= 0.0) {
            return bad("regularize parameters");
        }
        if !(self.filter.buffer_px >= 0.0) || self.filter.chords_per_corner == 0 {
            return bad("filter parameters");
        }
        let r = &self.reconstruct;
        if !(r.snap_tol > 0.0) || r.min_points < 3 || !(r.angle_tol_deg >= 0.0) || !(r.offset_tol >= 0.0) {
            return bad("reconstruct parameters");
        }
        if !(0.0..=100.0).contains(&r.base_percentile) || !(r.base_buffer_px >= 0.0) {
            return bad("reconstruct.base_percentile");
        }
        if !(self.footprints.gap_tol >= 0.0) {
            return bad("footprints.gap_tol");
        }
        if self.run.workers == Some(0) {
            return bad("run.workers");
        }
        let e = &self.eval;
        if !(e.offset_tol_px > 0.0) || !(e.sample_step_px > 0.0) || !(e.density > 0.0) || e.pixel_size.is_some_and(|s| !(s > 0.0)) {
            return bad("eval parameters");
        }
        Ok(())
    }

    /// The config as TOML, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = Config::parse("").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.crop.margin, 60);
        assert_eq!(c.detect.rho, 5.0);
        assert!((c.detect.tau_deg - 22.5).abs() < 1e-12);
        assert_eq!(c.kinetic.max_crossings, Crossings(Some(1)));
        assert_eq!(c.reconstruct.min_points, 10);
        assert_eq!(c.eval.seed, 42);
    }

    #[test]
    fn crossings_accept_inf() {
        let c = Config::parse("[kinetic]\nmax_crossings = \"inf\"\n").unwrap();
        assert_eq!(c.kinetic.max_crossings, Crossings(None));
        assert!(Config::parse("[kinetic]\nmax_crossings = \"lots\"\n").is_err());
    }

    #[test]
    fn unknown_key_is_config_error() {
        assert!(matches!(Config::parse("[detect]\nrhoo = 3\n"), Err(Error::Config(_))));
        assert!(matches!(Config::parse("[reconstruct]\nmin_points = 2\n"), Err(Error::Config(_))));
    }

    #[test]
    fn toml_round_trip() {
        let mut c = Config::default();
        c.kinetic.max_crossings = Crossings(None);
        c.reconstruct.base_elevation = Some(1.5);
        c.input.footprints = Some("f.geojson".into());
        assert_eq!(Config::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "[input]\nfootprints = \"fp.geojson\"\npointcloud = \"/abs/cloud.xyz\"\n").unwrap();
        let c = Config::load(&path).unwrap();
        assert_eq!(c.input.footprints.unwrap(), dir.path().join("fp.geojson"));
        assert_eq!(c.input.pointcloud.unwrap(), PathBuf::from("/abs/cloud.xyz"));
        assert_eq!(c.output.dir, dir.path().join("out"));
    }
}
