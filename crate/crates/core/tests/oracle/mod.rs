//! Slow, independent reference implementations used to check the fast
//! paths. Shared with the acceptance runner in the CLI crate.
#![allow(dead_code)]

use detkit::augment::LabelTrace;
use detkit::dataset::{Annotation, Detection};
use detkit::evaluation::{ImageEval, IOU_THRESHOLDS};
use detkit::geometry::{BBoxAbs, BBoxNorm, ImageDims};
use detkit::rng::SplitMix64;
use detkit::synthfarm::SceneTruth;

/// Number of grid cells per axis for rasterized IoU.
pub const RASTER_CELLS: usize = 3000;

/// Cells of a `cells`-wide grid over `[lo, hi)` whose centers fall in `[a, b)`.
fn covered(a: f64, b: f64, lo: f64, hi: f64, cells: usize) -> Vec<bool> {
    let step = (hi - lo) / cells as f64;
    (0..cells)
        .map(|i| {
            let c = lo + (i as f64 + 0.5) * step;
            c >= a && c < b
        })
        .collect()
}

/// IoU by counting grid cells. Boxes are axis-aligned, so the 2D count
/// factors into per-axis counts.
pub fn iou_raster(a: &BBoxAbs, b: &BBoxAbs) -> f64 {
    let (lo_x, hi_x) = (a.x1.min(b.x1), a.x2.max(b.x2));
    let (lo_y, hi_y) = (a.y1.min(b.y1), a.y2.max(b.y2));
    let ax = covered(a.x1, a.x2, lo_x, hi_x, RASTER_CELLS);
    let bx = covered(b.x1, b.x2, lo_x, hi_x, RASTER_CELLS);
    let ay = covered(a.y1, a.y2, lo_y, hi_y, RASTER_CELLS);
    let by = covered(b.y1, b.y2, lo_y, hi_y, RASTER_CELLS);
    let count = |v: &[bool]| v.iter().filter(|&&x| x).count() as f64;
    let both = |p: &[bool], q: &[bool]| p.iter().zip(q).filter(|(x, y)| **x && **y).count() as f64;
    let inter = both(&ax, &bx) * both(&ay, &by);
    let union = count(&ax) * count(&ay) + count(&bx) * count(&by) - inter;
    if union == 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// IoU by a full 2D cell count on an `n x n` grid.
pub fn iou_raster_2d(a: &BBoxAbs, b: &BBoxAbs, n: usize) -> f64 {
    let (lo_x, hi_x) = (a.x1.min(b.x1), a.x2.max(b.x2));
    let (lo_y, hi_y) = (a.y1.min(b.y1), a.y2.max(b.y2));
    let (sx, sy) = ((hi_x - lo_x) / n as f64, (hi_y - lo_y) / n as f64);
    let (mut inter, mut union) = (0u64, 0u64);
    for j in 0..n {
        let y = lo_y + (j as f64 + 0.5) * sy;
        for i in 0..n {
            let x = lo_x + (i as f64 + 0.5) * sx;
            let ina = x >= a.x1 && x < a.x2 && y >= a.y1 && y < a.y2;
            let inb = x >= b.x1 && x < b.x2 && y >= b.y1 && y < b.y2;
            inter += u64::from(ina && inb);
            union += u64::from(ina || inb);
        }
    }
    inter as f64 / union as f64
}

/// NMS written as the textbook loop: take the most confident remaining
/// box, delete everything of its class that overlaps it too much, repeat.
pub fn nms_reference(dets: &[Detection], dims: ImageDims, thr: f64, max_det: usize) -> Vec<Detection> {
    let mut remaining: Vec<(usize, Detection)> = dets.iter().copied().enumerate().collect();
    let mut kept = Vec::new();
    while !remaining.is_empty() && kept.len() < max_det {
        let mut best = 0;
        for (k, (i, d)) in remaining.iter().enumerate() {
            let (bi, bd) = remaining[best];
            if d.confidence > bd.confidence || (d.confidence == bd.confidence && *i < bi) {
                best = k;
            }
        }
        let (_, top) = remaining.remove(best);
        let tb = top.bbox.to_abs(dims);
        remaining.retain(|(_, d)| d.class_id != top.class_id || d.bbox.to_abs(dims).iou(&tb) <= thr);
        kept.push(top);
    }
    kept
}

/// Per-detection match outcome (indexed by detection) found by trying
/// every partial one-to-one assignment and keeping the lexicographically
/// best one when detections are ranked by confidence: each detection in
/// turn prefers being matched, then a higher IoU, then a lower GT index.
pub fn match_brute_force(dets: &[Detection], gts: &[Annotation], dims: ImageDims, thr: f64) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.partial_cmp(&dets[a].confidence).unwrap().then(a.cmp(&b)));
    let iou: Vec<Vec<f64>> = dets
        .iter()
        .map(|d| gts.iter().map(|g| d.bbox.to_abs(dims).iou(&g.bbox.to_abs(dims))).collect())
        .collect();
    let allowed = |d: usize, g: usize| gts[g].class_id == dets[d].class_id && iou[d][g] >= thr && iou[d][g] > 0.0;

    type Key = Vec<(u8, f64, i64)>;
    fn better(a: &Key, b: &Key) -> bool {
        for (x, y) in a.iter().zip(b) {
            if x.0 != y.0 {
                return x.0 > y.0;
            }
            if x.1 != y.1 {
                return x.1 > y.1;
            }
            if x.2 != y.2 {
                return x.2 > y.2;
            }
        }
        false
    }

    let mut best: Option<(Key, Vec<Option<usize>>)> = None;
    let mut current = vec![None; dets.len()];
    let mut used = vec![false; gts.len()];

    #[allow(clippy::too_many_arguments)]
    fn rec(
        pos: usize,
        order: &[usize],
        n_gt: usize,
        allowed: &dyn Fn(usize, usize) -> bool,
        iou: &[Vec<f64>],
        current: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut Option<(Key, Vec<Option<usize>>)>,
    ) {
        if pos == order.len() {
            let key: Key = order
                .iter()
                .map(|&d| match current[d] {
                    Some(g) => (1, iou[d][g], -(g as i64)),
                    None => (0, 0.0, 0),
                })
                .collect();
            if best.as_ref().is_none_or(|(bk, _)| better(&key, bk)) {
                *best = Some((key, current.clone()));
            }
            return;
        }
        let d = order[pos];
        current[d] = None;
        rec(pos + 1, order, n_gt, allowed, iou, current, used, best);
        for g in 0..n_gt {
            if !used[g] && allowed(d, g) {
                used[g] = true;
                current[d] = Some(g);
                rec(pos + 1, order, n_gt, allowed, iou, current, used, best);
                current[d] = None;
                used[g] = false;
            }
        }
    }

    rec(0, &order, gts.len(), &allowed, &iou, &mut current, &mut used, &mut best);
    best.map(|(_, a)| a).unwrap_or_default()
}

/// 101-point AP computed directly from its definition: at each recall
/// level, the best precision reached at any rank with at least that recall.
pub fn ap_direct(images: &[ImageEval], thr: f64) -> f64 {
    let mut ranked: Vec<(f64, &str, usize, bool)> = Vec::new();
    let mut total_gt = 0;
    for img in images {
        total_gt += img.ground_truth.len();
        let m = match_brute_force(&img.detections, &img.ground_truth, img.dims, thr);
        for (i, d) in img.detections.iter().enumerate() {
            ranked.push((d.confidence, &img.image_id, i, m[i].is_some()));
        }
    }
    if total_gt == 0 {
        return 0.0;
    }
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)).then(a.2.cmp(&b.2)));
    let mut pr = Vec::new();
    let mut tp = 0;
    for (k, r) in ranked.iter().enumerate() {
        tp += usize::from(r.3);
        pr.push((tp as f64 / total_gt as f64, tp as f64 / (k + 1) as f64));
    }
    let mut sum = 0.0;
    for r in 0..=100 {
        let level = r as f64 / 100.0;
        let p = pr
            .iter()
            .filter(|(rec, _)| *rec >= level)
            .map(|(_, p)| *p)
            .fold(0.0, f64::max);
        sum += p;
    }
    sum / 101.0
}

/// Mean of [`ap_direct`] over the standard thresholds.
pub fn map_direct(images: &[ImageEval]) -> f64 {
    IOU_THRESHOLDS.iter().map(|&t| ap_direct(images, t)).sum::<f64>() / IOU_THRESHOLDS.len() as f64
}

pub fn random_box(rng: &mut SplitMix64, dims: ImageDims) -> BBoxAbs {
    let w = rng.uniform(4.0, dims.w() / 2.0);
    let h = rng.uniform(4.0, dims.h() / 2.0);
    let x1 = rng.uniform(0.0, dims.w() - w);
    let y1 = rng.uniform(0.0, dims.h() - h);
    BBoxAbs { x1, y1, x2: x1 + w, y2: y1 + h }
}

fn norm(b: &BBoxAbs, dims: ImageDims) -> BBoxNorm {
    b.to_norm(dims).unwrap()
}

/// A small random scene: up to `max_gt` boxes of up to 2 classes and up to
/// `max_det` detections, most of them near a ground-truth box. Confidences
/// come from a coarse grid so ties are common.
pub fn random_image(rng: &mut SplitMix64, id: usize, max_gt: u64, max_det: u64) -> ImageEval {
    let dims = ImageDims::new(100, 80).unwrap();
    let n_gt = rng.below(max_gt + 1) as usize;
    let n_det = rng.below(max_det + 1) as usize;
    let gts: Vec<(u32, BBoxAbs)> = (0..n_gt)
        .map(|_| (rng.below(2) as u32, random_box(rng, dims)))
        .collect();
    let detections = (0..n_det)
        .map(|_| {
            let confidence = (1 + rng.below(10)) as f64 / 10.0;
            if !gts.is_empty() && rng.chance(0.75) {
                let (c, g) = gts[rng.below(gts.len() as u64) as usize];
                let s = rng.uniform(0.0, 0.35);
                let (dx, dy) = (rng.uniform(-s, s) * g.width(), rng.uniform(-s, s) * g.height());
                let b = BBoxAbs {
                    x1: (g.x1 + dx).clamp(0.0, dims.w() - 1.0),
                    y1: (g.y1 + dy).clamp(0.0, dims.h() - 1.0),
                    x2: (g.x2 + dx).clamp(1.0, dims.w()),
                    y2: (g.y2 + dy).clamp(1.0, dims.h()),
                };
                let b = if b.x2 - b.x1 < 1.0 || b.y2 - b.y1 < 1.0 { g } else { b };
                let class = if rng.chance(0.9) { c } else { 1 - c };
                Detection::new(class, norm(&b, dims), confidence)
            } else {
                Detection::new(rng.below(2) as u32, norm(&random_box(rng, dims), dims), confidence)
            }
        })
        .collect();
    ImageEval {
        image_id: format!("img{id:04}"),
        dims,
        ground_truth: gts.iter().map(|(c, b)| Annotation::new(*c, norm(b, dims))).collect(),
        detections,
    }
}

/// Centroid of the buoy's painted pixels that survive into the output,
/// in output coordinates.
pub fn transformed_centroid(
    scene: &SceneTruth,
    annotation: usize,
    trace: &LabelTrace,
    out_w: f64,
    out_h: f64,
) -> Option<(f64, f64)> {
    let idx = scene.buoys.iter().position(|b| b.annotation == Some(annotation))? as u32;
    let w = scene.dims().width as usize;
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for (i, o) in scene.owner.iter().enumerate() {
        if *o != Some(idx) {
            continue;
        }
        let (x, y) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
        if !trace.window.contains_point(x, y) {
            continue;
        }
        let (u, v) = trace.transform.apply(x, y);
        if (0.0..out_w).contains(&u) && (0.0..out_h).contains(&v) {
            sx += u;
            sy += v;
            n += 1;
        }
    }
    (n > 0).then(|| (sx / n as f64, sy / n as f64))
}
