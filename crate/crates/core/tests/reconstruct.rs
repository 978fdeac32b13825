use roofkit_core::geodata::{Footprint, PointCloud};
use roofkit_core::geom::{Point2, Point3};
use roofkit_core::georef_filter::GeoSegment;
use roofkit_core::reconstruct::*;

fn square(id: &str, x0: f64, y0: f64, side: f64) -> Footprint {
    Footprint::new(
        id,
        vec![
            Point2::new(x0, y0),
            Point2::new(x0 + side, y0),
            Point2::new(x0 + side, y0 + side),
            Point2::new(x0, y0 + side),
        ],
        vec![],
    )
    .unwrap()
}

fn line(ax: f64, ay: f64, bx: f64, by: f64) -> GeoSegment {
    GeoSegment { g0: Point2::new(ax, ay), g1: Point2::new(bx, by), source_building: "b".into() }
}

/// Grid samples at 0.5 m spacing over `[x0, x1] × [y0, y1]`.
fn grid(x0: f64, y0: f64, x1: f64, y1: f64, z: impl Fn(f64, f64) -> f64) -> Vec<Point3<f64>> {
    let mut pts = Vec::new();
    let mut y = y0 + 0.25;
    while y < y1 {
        let mut x = x0 + 0.25;
        while x < x1 {
            pts.push(Point3::new(x, y, z(x, y)));
            x += 0.5;
        }
        y += 0.5;
    }
    pts
}

/// Σ cell area × (plane height at cell centroid − base).
fn prism_volume(p: &Partition, base: f64) -> f64 {
    let mut v = 0.0;
    for (c, cell) in p.cells.iter().enumerate() {
        let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for ring in p.cell_rings(c) {
            let n = ring.len();
            for i in 0..n {
                let (p0, p1) = (ring[i], ring[(i + 1) % n]);
                let cr = p0.cross(p1);
                a += cr / 2.0;
                cx += (p0.x + p1.x) * cr / 6.0;
                cy += (p0.y + p1.y) * cr / 6.0;
            }
        }
        let pl = cell.plane.unwrap();
        v += a * (pl.z_at(Point2::new(cx / a, cy / a)) - base);
    }
    v
}

fn build(fp: &Footprint, lines: &[GeoSegment], pts: Vec<Point3<f64>>) -> (Partition, SolidModel) {
    let cloud = PointCloud::new(pts).unwrap();
    let mut p = partition_footprint(fp, lines, DEFAULT_SNAP_TOL).unwrap();
    assign_and_fit(&mut p, &cloud, 10).unwrap();
    merge_cells_elevation_prior(&mut p, &cloud, &MergeParams::default());
    let s = extrude_solid(&p, 0.0).unwrap();
    (p, s)
}

#[test]
fn no_rooflines_single_cell() {
    let fp = square("a", 0.0, 0.0, 10.0);
    let p = partition_footprint(&fp, &[], DEFAULT_SNAP_TOL).unwrap();
    assert_eq!(p.cells.len(), 1);
    assert!((p.cells[0].area - 100.0).abs() < 1e-9);
}

#[test]
fn bisector_halves() {
    let fp = square("a", 0.0, 0.0, 10.0);
    let p = partition_footprint(&fp, &[line(5.0, -3.0, 5.0, 13.0)], DEFAULT_SNAP_TOL).unwrap();
    assert_eq!(p.cells.len(), 2);
    for c in &p.cells {
        assert!((c.area - 50.0).abs() < 1e-9);
    }
}

#[test]
fn two_bisectors_four_cycle() {
    let fp = square("a", 0.0, 0.0, 10.0);
    let p = partition_footprint(&fp, &[line(5.0, 0.0, 5.0, 10.0), line(0.0, 5.0, 10.0, 5.0)], DEFAULT_SNAP_TOL).unwrap();
    assert_eq!(p.cells.len(), 4);
    for c in &p.cells {
        assert!((c.area - 25.0).abs() < 1e-9);
        assert_eq!(c.neighbors.len(), 2);
        for &(_, len) in &c.neighbors {
            assert!((len - 5.0).abs() < 1e-9);
        }
    }
}

#[test]
fn dangling_end_extends() {
    // Stops 2 m short of the far wall; the end is extended to it.
    let fp = square("a", 0.0, 0.0, 10.0);
    let p = partition_footprint(&fp, &[line(5.0, 0.0, 5.0, 8.0)], DEFAULT_SNAP_TOL).unwrap();
    assert_eq!(p.cells.len(), 2);
    // T-junction: the second line stops at the first.
    let p = partition_footprint(&fp, &[line(5.0, 0.0, 5.0, 10.0), line(0.0, 5.0, 4.0, 5.0)], DEFAULT_SNAP_TOL).unwrap();
    assert_eq!(p.cells.len(), 3);
    assert!((p.total_area() - 100.0).abs() < 1e-9);
}

#[test]
fn near_miss_snaps() {
    let fp = square("a", 0.0, 0.0, 10.0);
    let p = partition_footprint(&fp, &[line(5.0, 0.0005, 5.0, 9.9995)], DEFAULT_SNAP_TOL).unwrap();
    assert_eq!(p.cells.len(), 2);
    assert_eq!(p.arrangement.vertices.len(), 6);
}

#[test]
fn fit_thresholds() {
    let fp = square("a", 0.0, 0.0, 10.0);
    let mut p = partition_footprint(&fp, &[line(5.0, 0.0, 5.0, 10.0)], DEFAULT_SNAP_TOL).unwrap();
    let mut pts = grid(0.0, 0.0, 5.0, 10.0, |x, _| 0.5 * x + 1.0);
    pts.push(Point3::new(7.0, 7.0, 2.0));
    pts.push(Point3::new(8.0, 2.0, 2.0));
    let cloud = PointCloud::new(pts).unwrap();
    assign_and_fit(&mut p, &cloud, 3).unwrap();
    let fitted: Vec<_> = p.cells.iter().filter(|c| c.plane.is_some()).collect();
    assert_eq!(fitted.len(), 1);
    let pl = fitted[0].plane.unwrap();
    assert!((pl.a - 0.5).abs() < 1e-9 && pl.b.abs() < 1e-9 && (pl.d - 1.0).abs() < 1e-9);
}

#[test]
fn no_points_is_error() {
    let fp = square("a", 0.0, 0.0, 10.0);
    let mut p = partition_footprint(&fp, &[], DEFAULT_SNAP_TOL).unwrap();
    let cloud = PointCloud::new(vec![Point3::new(50.0, 50.0, 1.0)]).unwrap();
    let e = assign_and_fit(&mut p, &cloud, 10).unwrap_err();
    assert!(e.to_string().contains("no elevation data"));
}

#[test]
fn boundary_point_goes_to_lowest_cell() {
    let fp = square("a", 0.0, 0.0, 10.0);
    let mut p = partition_footprint(&fp, &[line(5.0, 0.0, 5.0, 10.0)], DEFAULT_SNAP_TOL).unwrap();
    let cloud = PointCloud::new(vec![Point3::new(5.0, 5.0, 1.0)]).unwrap();
    let _ = assign_and_fit(&mut p, &cloud, 10);
    let owners: Vec<usize> = p.cells.iter().filter(|c| !c.points.is_empty()).map(|c| c.id).collect();
    assert_eq!(owners, vec![0]);
}

#[test]
fn flat_box() {
    let fp = square("box", 0.0, 0.0, 10.0);
    let (p, s) = build(&fp, &[], grid(0.0, 0.0, 10.0, 10.0, |_, _| 3.0));
    assert_eq!(p.cells.len(), 1);
    assert_eq!(s.face_count(), 6);
    assert_eq!(s.vertices.len(), 8);
    assert!((s.volume() - 300.0).abs() < 1e-9);
}

#[test]
fn redundant_line_on_flat_roof_is_merged() {
    let fp = square("box", 0.0, 0.0, 10.0);
    let (p, s) = build(&fp, &[line(5.0, 0.0, 5.0, 10.0)], grid(0.0, 0.0, 10.0, 10.0, |_, _| 3.0));
    assert_eq!(p.cells.len(), 1);
    assert!((p.total_area() - 100.0).abs() < 1e-9);
    s.validate().unwrap();
    assert!((s.volume() - 300.0).abs() < 1e-9);
}

#[test]
fn two_level_step() {
    let fp = square("step", 0.0, 0.0, 10.0);
    let (p, s) = build(&fp, &[line(5.0, 0.0, 5.0, 10.0)], grid(0.0, 0.0, 10.0, 10.0, |x, _| if x < 5.0 { 3.0 } else { 6.0 }));
    assert_eq!(p.cells.len(), 2);
    assert_eq!(s.count_role(FaceRole::Roof), 2);
    assert_eq!(s.count_role(FaceRole::Wall), 5);
    assert_eq!(s.count_role(FaceRole::Floor), 1);
    assert_eq!(s.face_count(), 8);
    assert!((s.volume() - 450.0).abs() < 1e-9);
    assert!((s.volume() - prism_volume(&p, 0.0)).abs() < 1e-9);
}

#[test]
fn gable_ridge_is_welded() {
    let fp = square("gable", 0.0, 0.0, 10.0);
    let z = |_: f64, y: f64| 4.0 + 0.6 * (5.0 - (y - 5.0).abs());
    let (p, s) = build(&fp, &[line(0.0, 5.0, 10.0, 5.0)], grid(0.0, 0.0, 10.0, 10.0, z));
    assert_eq!(p.cells.len(), 2);
    assert_eq!(s.count_role(FaceRole::Roof), 2);
    assert_eq!(s.count_role(FaceRole::Wall), 4);
    // Eaves at 4, ridge at 7: box plus triangular prism.
    let wedge = 10.0 * 4.0 * 10.0 + 0.5 * 10.0 * 3.0 * 10.0;
    assert!((s.volume() - wedge).abs() < 1e-6 * wedge, "{}", s.volume());
    let ridge: Vec<_> = s.vertices.iter().filter(|v| (v.z - 7.0).abs() < 1e-6).collect();
    assert_eq!(ridge.len(), 2);
}

#[test]
fn sliver_without_points_is_absorbed() {
    let fp = square("s", 0.0, 0.0, 10.0);
    let lines = [line(4.9, 0.0, 4.9, 10.0), line(5.1, 0.0, 5.1, 10.0)];
    let pts: Vec<_> = grid(0.0, 0.0, 10.0, 10.0, |x, _| if x < 5.0 { 3.0 } else { 6.0 })
        .into_iter()
        .filter(|p| p.x < 4.9 || p.x > 5.1)
        .collect();
    let cloud = PointCloud::new(pts).unwrap();
    let mut p = partition_footprint(&fp, &lines, DEFAULT_SNAP_TOL).unwrap();
    assert_eq!(p.cells.len(), 3);
    assign_and_fit(&mut p, &cloud, 10).unwrap();
    merge_cells_elevation_prior(&mut p, &cloud, &MergeParams::default());
    assert_eq!(p.cells.len(), 2);
    assert!((p.total_area() - 100.0).abs() < 1e-9);
    extrude_solid(&p, 0.0).unwrap();
}

#[test]
fn crossing_planes_split_interior_edge() {
    // Two ramps sloping opposite ways along the shared edge.
    let fp = square("x", 0.0, 0.0, 10.0);
    let z = |x: f64, y: f64| if x < 5.0 { 3.0 + 0.2 * y } else { 5.0 - 0.2 * y };
    let (p, s) = build(&fp, &[line(5.0, 0.0, 5.0, 10.0)], grid(0.0, 0.0, 10.0, 10.0, z));
    assert_eq!(p.cells.len(), 2);
    assert_eq!(s.count_role(FaceRole::Wall), 4 + 2);
    assert!((s.volume() - prism_volume(&p, 0.0)).abs() < 1e-9);
}

#[test]
fn courtyard_footprint() {
    let fp = Footprint::new(
        "c",
        vec![Point2::new(0.0, 0.0), Point2::new(20.0, 0.0), Point2::new(20.0, 20.0), Point2::new(0.0, 20.0)],
        vec![vec![Point2::new(5.0, 5.0), Point2::new(15.0, 5.0), Point2::new(15.0, 15.0), Point2::new(5.0, 15.0)]],
    )
    .unwrap();
    let (p, s) = build(&fp, &[], grid(0.0, 0.0, 20.0, 20.0, |_, _| 4.0));
    assert!((p.total_area() - 300.0).abs() < 1e-9);
    assert!((s.volume() - 1200.0).abs() < 1e-9);
    assert_eq!(s.count_role(FaceRole::Wall), 8);
    let obj = to_obj(&s);
    let back = parse_obj(&obj, "c.obj").unwrap();
    assert_eq!(back.faces.len(), s.faces.len());
}

#[test]
fn l_shape_with_step() {
    let fp = Footprint::new(
        "l",
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(12.0, 0.0),
            Point2::new(12.0, 6.0),
            Point2::new(6.0, 6.0),
            Point2::new(6.0, 12.0),
            Point2::new(0.0, 12.0),
        ],
        vec![],
    )
    .unwrap();
    let z = |x: f64, _: f64| if x < 6.0 { 5.0 } else { 3.5 };
    let pts: Vec<_> = grid(0.0, 0.0, 12.0, 12.0, z).into_iter().filter(|p| p.x < 6.0 || p.y < 6.0).collect();
    let (p, s) = build(&fp, &[line(6.0, 0.0, 6.0, 6.0)], pts);
    assert_eq!(p.cells.len(), 2);
    let expect = 72.0 * 5.0 + 36.0 * 3.5;
    assert!((s.volume() - expect).abs() < 1e-9);
}

#[test]
fn exports_round_trip() {
    let fp = square("box", 100.0, 200.0, 10.0);
    let (_, s) = build(&fp, &[], grid(100.0, 200.0, 110.0, 210.0, |_, _| 3.3));
    let obj = to_obj(&s);
    assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 8);
    assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 6);
    let back = parse_obj(&obj, "box.obj").unwrap();
    assert_eq!(back.building_id, "box");
    for (a, b) in back.vertices.iter().zip(&s.vertices) {
        assert!(a.dist(*b) <= 1e-9);
    }
    back.validate().unwrap();

    let cj = cityjson_value(&s);
    let geom = &cj["CityObjects"]["box"]["geometry"][0];
    assert_eq!(geom["type"], "Solid");
    assert_eq!(geom["lod"], "2");
    assert_eq!(geom["boundaries"].as_array().unwrap().len(), 1);
    assert_eq!(geom["boundaries"][0].as_array().unwrap().len(), 6);
    let back = parse_cityjson(&cj.to_string(), "box.city.json").unwrap();
    for (a, b) in back.vertices.iter().zip(&s.vertices) {
        assert!(a.dist(*b) <= 1e-6);
    }
    assert_eq!(back.faces, s.faces);

    let dir = tempfile::tempdir().unwrap();
    for fmt in [ModelFormat::Obj, ModelFormat::CityJson] {
        let path = dir.path().join(format!("box.{}", fmt.extension()));
        export_model(&s, fmt, &path).unwrap();
        assert_eq!(read_model(&path).unwrap().faces.len(), 6);
    }
}

#[test]
fn base_from_low_percentile() {
    let fp = square("a", 0.0, 0.0, 10.0);
    let mut pts = grid(-5.0, -5.0, 15.0, 15.0, |_, _| 0.0);
    pts.retain(|p| !(0.0..=10.0).contains(&p.x) || !(0.0..=10.0).contains(&p.y));
    pts.extend(grid(0.0, 0.0, 10.0, 10.0, |_, _| 3.0));
    let cloud = PointCloud::new(pts).unwrap();
    assert_eq!(base_elevation(&fp, &cloud, 3.0, 0.05).unwrap(), Some(0.0));
}

#[test]
fn line_partly_along_boundary_keeps_interior_part() {
    // L footprint; y = 8 runs inside for x < 9 and along the boundary after.
    let fp = Footprint::new(
        "l",
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(20.0, 0.0),
            Point2::new(20.0, 8.0),
            Point2::new(9.0, 8.0),
            Point2::new(9.0, 20.0),
            Point2::new(0.0, 20.0),
        ],
        vec![],
    )
    .unwrap();
    let p = partition_footprint(&fp, &[line(-5.0, 8.0, 25.0, 8.0)], DEFAULT_SNAP_TOL).unwrap();
    assert_eq!(p.cells.len(), 2);
    let mut areas: Vec<f64> = p.cells.iter().map(|c| c.area).collect();
    areas.sort_by(f64::total_cmp);
    assert!((areas[0] - 108.0).abs() < 1e-9 && (areas[1] - 160.0).abs() < 1e-9);
}
