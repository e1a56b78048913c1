mod oracle;

use detkit::dataset::Detection;
use detkit::evaluation::{average_precision, evaluate, match_image, pr_curve, IOU_THRESHOLDS};
use detkit::geometry::{BBoxAbs, ImageDims};
use detkit::postprocess::{nms, PostprocessConfig};
use detkit::rng::SplitMix64;
use oracle::*;

#[test]
fn iou_matches_raster() {
    let dims = ImageDims::new(200, 150).unwrap();
    let mut rng = SplitMix64::new(17);
    for _ in 0..1000 {
        let a = random_box(&mut rng, dims);
        // Half the pairs are forced to overlap.
        let b = if rng.chance(0.5) {
            let (cx, cy) = a.center();
            let (w, h) = (rng.uniform(2.0, 80.0), rng.uniform(2.0, 60.0));
            BBoxAbs {
                x1: cx - w * rng.unit(),
                y1: cy - h * rng.unit(),
                x2: cx + w * rng.unit() + 0.5,
                y2: cy + h * rng.unit() + 0.5,
            }
        } else {
            random_box(&mut rng, dims)
        };
        let want = iou_raster(&a, &b);
        assert!((a.iou(&b) - want).abs() < 1e-3, "{a:?} {b:?}: {} vs {want}", a.iou(&b));
    }
}

#[test]
fn iou_one_seventh_by_2d_count() {
    let a = BBoxAbs::new(0.0, 0.0, 2.0, 2.0).unwrap();
    let b = BBoxAbs::new(1.0, 1.0, 3.0, 3.0).unwrap();
    assert!((a.iou(&b) - 1.0 / 7.0).abs() < 1e-9);
    assert!((iou_raster_2d(&a, &b, 600) - 1.0 / 7.0).abs() < 1e-9);
}

#[test]
fn nms_matches_reference() {
    let dims = ImageDims::new(100, 80).unwrap();
    let mut rng = SplitMix64::new(3);
    for case in 0..1000 {
        let img = random_image(&mut rng, case, 6, 12);
        for thr in [0.3, 0.65, 1.0] {
            let cfg = PostprocessConfig {
                nms_iou_threshold: thr,
                ..Default::default()
            };
            let got = nms(&img.detections, dims, &cfg);
            assert_eq!(got, nms_reference(&img.detections, dims, thr, cfg.max_detections));
            assert_eq!(nms(&got, dims, &cfg), got);
            for (i, a) in got.iter().enumerate() {
                for b in &got[i + 1..] {
                    if a.class_id == b.class_id {
                        assert!(a.bbox.to_abs(dims).iou(&b.bbox.to_abs(dims)) <= thr);
                    }
                }
            }
        }
    }
}

#[test]
fn nms_cap() {
    let dims = ImageDims::new(100, 80).unwrap();
    let mut rng = SplitMix64::new(9);
    let dets: Vec<Detection> = (0..50).map(|i| random_image(&mut rng, i, 3, 12).detections).flatten().collect();
    let cfg = PostprocessConfig {
        max_detections: 7,
        nms_iou_threshold: 1.0,
        ..Default::default()
    };
    assert_eq!(nms(&dets, dims, &cfg), nms_reference(&dets, dims, 1.0, 7));
    assert_eq!(nms(&dets, dims, &cfg).len(), 7);
}

#[test]
fn matching_and_ap_match_brute_force() {
    let mut rng = SplitMix64::new(11);
    let images: Vec<_> = (0..200).map(|i| random_image(&mut rng, i, 6, 6)).collect();
    for &thr in &IOU_THRESHOLDS {
        let mut records = Vec::new();
        let mut total = 0;
        for img in &images {
            let got = match_image(&img.image_id, img.dims, &img.detections, &img.ground_truth, thr);
            let want = match_brute_force(&img.detections, &img.ground_truth, img.dims, thr);
            for r in &got {
                assert_eq!(r.gt, want[r.detection], "{} det {} at {thr}", img.image_id, r.detection);
            }
            total += img.ground_truth.len();
            records.extend(got);
        }
        let ap = average_precision(&pr_curve(&records, total));
        assert!((ap - ap_direct(&images, thr)).abs() < 1e-9);
    }
    let res = evaluate(&images).unwrap();
    assert!((res.map - map_direct(&images)).abs() < 1e-9);
}

#[test]
fn ap_hand_case() {
    use detkit::evaluation::MatchRecord;
    let rec = |i: usize, c: f64, m: bool| MatchRecord {
        image_id: "a".into(),
        detection: i,
        confidence: c,
        matched: m,
        gt: m.then_some(i),
        iou: if m { 1.0 } else { 0.0 },
    };
    let records = [rec(0, 0.9, true), rec(1, 0.8, false), rec(2, 0.7, true)];
    let ap = average_precision(&pr_curve(&records, 2));
    assert!((ap - (51.0 + 50.0 * 2.0 / 3.0) / 101.0).abs() < 1e-12);
}
