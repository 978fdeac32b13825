use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use roofkit_core::config::Config;
use roofkit_core::evaluate::line_completeness;
use roofkit_core::georef_filter::read_rooflines;
use roofkit_core::pipeline::{run_eval, run_pipeline};
use roofkit_core::synth::{generate_scene, truth_segments, SceneSpec};

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect()
}

#[test]
fn four_shapes_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SceneSpec::four_shapes(0.0);
    let files = generate_scene(&spec, dir.path()).unwrap();
    let cfg = Config::load(&files.config).unwrap();
    let summary = run_pipeline(&cfg, Some(2)).unwrap();
    assert_eq!((summary.buildings, summary.succeeded), (4, 4));

    let mut extracted = Vec::new();
    for e in fs::read_dir(dir.path().join("out/rooflines")).unwrap() {
        extracted.extend(read_rooflines(&e.unwrap().path()).unwrap().iter().map(|g| g.segment()));
    }
    let c = line_completeness(&extracted, &truth_segments(&spec), 3.0 * spec.pixel_size, spec.pixel_size).unwrap();
    assert!(c >= 0.95, "completeness {c}");

    let ev = run_eval(&cfg).unwrap();
    assert_eq!(ev.reports.len(), 4);
    assert!(ev.unmatched.is_empty() && ev.missing.is_empty());
    assert!(ev.aggregate.mean <= 0.1, "{:?}", ev.aggregate);
    for r in &ev.reports {
        if let Some(c) = r.completeness {
            assert!(c >= 0.95, "{}: {c}", r.building_id);
        }
    }
    assert!(dir.path().join("out/eval/aggregate.csv").is_file());
}

#[test]
fn worker_count_does_not_change_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let files = generate_scene(&SceneSpec::grid(12, 0.05), dir.path()).unwrap();
    let mut cfg = Config::load(&files.config).unwrap();
    let mut runs = Vec::new();
    for workers in [1, 4] {
        cfg.output.dir = dir.path().join(format!("out{workers}"));
        let s = run_pipeline(&cfg, Some(workers)).unwrap();
        assert_eq!(s.succeeded, 12);
        runs.push((read_dir_bytes(&cfg.output.dir.join("models")), read_dir_bytes(&cfg.output.dir.join("rooflines"))));
    }
    assert_eq!(runs[0].0.len(), 12);
    assert!(runs[0] == runs[1], "outputs differ between 1 and 4 workers");
}

#[test]
fn debug_artifacts_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = SceneSpec::four_shapes(0.0);
    spec.buildings.truncate(1);
    let files = generate_scene(&spec, dir.path()).unwrap();
    let mut cfg = Config::load(&files.config).unwrap();
    cfg.output.debug_dir = Some(dir.path().join("dbg"));
    run_pipeline(&cfg, Some(1)).unwrap();
    let sub = dir.path().join("dbg").join(&spec.buildings[0].id);
    assert!(sub.is_dir());
    assert!(fs::read_dir(&sub).unwrap().count() >= 3);
}
