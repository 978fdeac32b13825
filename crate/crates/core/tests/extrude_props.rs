use proptest::prelude::*;
use roofkit_core::geodata::{Footprint, PointCloud};
use roofkit_core::geom::{Point2, Point3};
use roofkit_core::georef_filter::GeoSegment;
use roofkit_core::reconstruct::*;

fn prism_volume(p: &Partition, base: f64) -> f64 {
    let mut v = 0.0;
    for (c, cell) in p.cells.iter().enumerate() {
        let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for ring in p.cell_rings(c) {
            for i in 0..ring.len() {
                let (p0, p1) = (ring[i], ring[(i + 1) % ring.len()]);
                let cr = p0.cross(p1);
                a += cr / 2.0;
                cx += (p0.x + p1.x) * cr / 6.0;
                cy += (p0.y + p1.y) * cr / 6.0;
            }
        }
        v += a * (cell.plane.unwrap().z_at(Point2::new(cx / a, cy / a)) - base);
    }
    v
}

fn arb_case() -> impl Strategy<Value = (Vec<(f64, f64, f64, f64)>, Vec<(f64, f64, f64)>, bool)> {
    (
        prop::collection::vec((0.0..20.0f64, 0.0..20.0f64, 0.0..20.0f64, 0.0..20.0f64), 0..5),
        prop::collection::vec((-0.15..0.15f64, -0.15..0.15f64, 4.0..12.0f64), 16),
        any::<bool>(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn random_roofs_extrude_to_valid_solids((lines, planes, l_shape) in arb_case()) {
        let outer = if l_shape {
            vec![Point2::new(0.0, 0.0), Point2::new(20.0, 0.0), Point2::new(20.0, 8.0), Point2::new(9.0, 8.0), Point2::new(9.0, 20.0), Point2::new(0.0, 20.0)]
        } else {
            vec![Point2::new(0.0, 0.0), Point2::new(20.0, 0.0), Point2::new(20.0, 20.0), Point2::new(0.0, 20.0)]
        };
        let fp = Footprint::new("p", outer, vec![]).unwrap();
        let segs: Vec<GeoSegment> = lines
            .iter()
            .filter(|l| (l.0 - l.2).hypot(l.1 - l.3) > 1.0)
            .map(|&(ax, ay, bx, by)| GeoSegment { g0: Point2::new(ax, ay), g1: Point2::new(bx, by), source_building: "p".into() })
            .collect();
        let mut part = partition_footprint(&fp, &segs, DEFAULT_SNAP_TOL).unwrap();
        prop_assert!((part.total_area() - fp.area()).abs() <= 1e-6 * fp.area());

        // A random plane per cell, sampled on a fine grid inside the cell.
        let mut pts = Vec::new();
        for c in 0..part.cells.len() {
            let (a, b, d) = planes[c % planes.len()];
            let mut y = 0.05;
            while y < 20.0 {
                let mut x = 0.05;
                while x < 20.0 {
                    let q = Point2::new(x, y);
                    if part.cell_contains(c, q, 0.0) {
                        pts.push(Point3::new(x, y, a * (x - 10.0) + b * (y - 10.0) + d));
                    }
                    x += 0.1;
                }
                y += 0.1;
            }
        }
        let cloud = PointCloud::new(pts).unwrap();
        assign_and_fit(&mut part, &cloud, 3).unwrap();
        merge_cells_elevation_prior(&mut part, &cloud, &MergeParams { min_points: 3, ..MergeParams::default() });
        prop_assert!((part.total_area() - fp.area()).abs() <= 1e-6 * fp.area());
        match extrude_solid(&part, 0.0) {
            Ok(solid) => {
                solid.validate().unwrap();
                let want = prism_volume(&part, 0.0);
                prop_assert!((solid.volume() - want).abs() <= 1e-6 * want, "{} vs {}", solid.volume(), want);
            }
            Err(e) => prop_assert!(e.to_string().contains("non-manifold"), "{}", e),
        }
    }
}
