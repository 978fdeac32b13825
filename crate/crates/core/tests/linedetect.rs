use proptest::prelude::*;
use roofkit_core::geodata::GrayImage;
use roofkit_core::geom::Point2;
use roofkit_core::linedetect::{detect_regions, detect_segments, gradient_field, DetectParams, PixelSegment};

fn detect(img: &GrayImage) -> Vec<PixelSegment> {
    detect_segments(&gradient_field(img, 5.0).unwrap(), &DetectParams::default())
}

/// Image of axis-aligned bright blocks on a dark background.
fn blocks(w: usize, h: usize, rects: &[(usize, usize, usize, usize, u8)]) -> GrayImage {
    GrayImage::from_fn(w, h, |x, y| {
        rects.iter().rev().find(|r| x >= r.0 && x < r.2 && y >= r.1 && y < r.3).map_or(20, |r| r.4)
    })
}

fn same_segment(a: &PixelSegment, b: &PixelSegment, tol: f64) -> bool {
    (a.p0.dist(b.p0) <= tol && a.p1.dist(b.p1) <= tol) || (a.p0.dist(b.p1) <= tol && a.p1.dist(b.p0) <= tol)
}

#[test]
fn uniform_images_have_no_segments() {
    for v in [0u8, 17, 128, 255] {
        assert!(detect(&GrayImage::filled(64, 48, v)).is_empty());
    }
}

#[test]
fn rectangle_gives_four_sides() {
    let img = blocks(120, 100, &[(30, 20, 90, 80, 200)]);
    let segs = detect(&img);
    assert_eq!(segs.len(), 4, "{segs:?}");
    let sides = [
        PixelSegment::new(Point2::new(30.0, 20.0), Point2::new(90.0, 20.0)),
        PixelSegment::new(Point2::new(90.0, 20.0), Point2::new(90.0, 80.0)),
        PixelSegment::new(Point2::new(30.0, 80.0), Point2::new(90.0, 80.0)),
        PixelSegment::new(Point2::new(30.0, 20.0), Point2::new(30.0, 80.0)),
    ];
    for side in &sides {
        assert!(segs.iter().any(|s| same_segment(s, side, 2.0)), "missing {side:?} in {segs:?}");
    }
}

#[test]
fn deterministic() {
    let img = blocks(90, 90, &[(10, 10, 50, 70, 150), (40, 30, 80, 60, 230)]);
    assert_eq!(detect(&img), detect(&img));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn quarter_turn_rotates_segments(
        x0 in 5usize..40, y0 in 5usize..40, w in 15usize..40, h in 15usize..40, v in 80u8..255,
    ) {
        let (iw, ih) = (90usize, 80usize);
        let img = blocks(iw, ih, &[(x0, y0, x0 + w, y0 + h, v)]);
        let segs = detect(&img);
        let rot = detect(&img.rotate90());
        prop_assert_eq!(segs.len(), rot.len());
        // Clockwise quarter turn of the continuous pixel frame: (u, v) -> (H - v, u).
        let turn = |p: Point2<f64>| Point2::new(ih as f64 - p.y, p.x);
        for s in &segs {
            let t = PixelSegment::new(turn(s.p0), turn(s.p1));
            prop_assert!(rot.iter().any(|r| same_segment(r, &t, 0.5)), "{:?} has no rotated match in {:?}", t, rot);
        }
    }

    #[test]
    fn regions_avoid_masked_pixels(seed in 0u64..1000) {
        let img = GrayImage::from_fn(40, 40, |x, y| {
            let h = (x as u64 * 31 + y as u64 * 17 + seed * 7) % 97;
            if x > 20 { 180 } else { (h % 40) as u8 }
        });
        let field = gradient_field(&img, 12.0).unwrap();
        let params = DetectParams { min_length: 2.0, density_threshold: 0.1, ..DetectParams::default() };
        for (seg, region) in detect_regions(&field, &params) {
            prop_assert!(seg.length() >= params.min_length);
            for &i in &region.pixels {
                prop_assert!(field.usable[i]);
            }
        }
    }
}
