//! Detection ↔ ground-truth matching, precision/recall curves, AP and mAP.
//!
//! Matching is greedy per image: detections are visited by confidence
//! (descending, ties by file order) and each one claims the unmatched
//! same-class ground truth with the highest IoU, provided that IoU reaches
//! the threshold. AP uses 101-point interpolation; mAP averages AP over the
//! ten IoU thresholds 0.50, 0.55, ..., 0.95.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Annotation, DatasetManifest, Detection};
use crate::geometry::{BBoxAbs, ImageDims};
use crate::postprocess::{confidence_order, postprocess, PostprocessConfig};

/// IoU thresholds for mAP@[.5:.05:.95], written as exact decimals.
pub const IOU_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

/// Number of recall sample points for interpolated AP.
pub const RECALL_POINTS: usize = 101;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("duplicate image id {0:?}")]
    DuplicateImage(String),
    #[error("detections reference unknown images: {}", .0.join(", "))]
    UnknownImages(Vec<String>),
    #[error("test set {0:?} not found")]
    UnknownTestSet(String),
}

/// One image's ground truth and (already postprocessed) detections.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEval {
    pub image_id: String,
    pub dims: ImageDims,
    pub ground_truth: Vec<Annotation>,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchRecord {
    pub image_id: String,
    /// Index into the image's detection list.
    pub detection: usize,
    pub confidence: f64,
    pub matched: bool,
    pub gt: Option<usize>,
    /// IoU with the matched ground truth, 0 when unmatched.
    pub iou: f64,
}

/// Matches one image's detections at `iou_threshold`. Records come back in
/// visiting order (confidence descending).
pub fn match_image(
    image_id: &str,
    dims: ImageDims,
    detections: &[Detection],
    ground_truth: &[Annotation],
    iou_threshold: f64,
) -> Vec<MatchRecord> {
    let gt_boxes: Vec<BBoxAbs> = ground_truth.iter().map(|g| g.bbox.to_abs(dims)).collect();
    let mut taken = vec![false; ground_truth.len()];
    let mut records = Vec::with_capacity(detections.len());

    for i in confidence_order(detections) {
        let d = &detections[i];
        let b = d.bbox.to_abs(dims);
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in ground_truth.iter().enumerate() {
            if taken[g] || gt.class_id != d.class_id {
                continue;
            }
            let v = b.iou(&gt_boxes[g]);
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((g, v));
            }
        }
        let hit = best.filter(|&(_, v)| v >= iou_threshold && v > 0.0);
        if let Some((g, _)) = hit {
            taken[g] = true;
        }
        records.push(MatchRecord {
            image_id: image_id.to_string(),
            detection: i,
            confidence: d.confidence,
            matched: hit.is_some(),
            gt: hit.map(|(g, _)| g),
            iou: hit.map_or(0.0, |(_, v)| v),
        });
    }
    records
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub confidence: f64,
    pub tp: usize,
    pub fp: usize,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PrCurve {
    /// One point per ranked detection, cutoffs descending.
    pub points: Vec<PrPoint>,
    pub total_gt: usize,
    pub num_detections: usize,
}

impl PrCurve {
    pub fn no_ground_truth(&self) -> bool {
        self.total_gt == 0
    }
}

/// Cumulative precision/recall over records pooled across images.
///
/// Records are ranked by confidence descending; equal confidences are
/// ordered by image id and then detection index so the result does not
/// depend on the order images were processed in. With no ground truth the
/// curve is empty.
pub fn pr_curve(records: &[MatchRecord], total_gt: usize) -> PrCurve {
    let mut ranked: Vec<&MatchRecord> = records.iter().collect();
    ranked.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.image_id.cmp(&b.image_id))
            .then_with(|| a.detection.cmp(&b.detection))
    });
    let mut curve = PrCurve {
        points: Vec::new(),
        total_gt,
        num_detections: records.len(),
    };
    if total_gt == 0 {
        return curve;
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    for r in ranked {
        if r.matched {
            tp += 1;
        } else {
            fp += 1;
        }
        curve.points.push(PrPoint {
            confidence: r.confidence,
            tp,
            fp,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / total_gt as f64,
        });
    }
    curve
}

/// 101-point interpolated average precision.
pub fn average_precision(curve: &PrCurve) -> f64 {
    if curve.points.is_empty() {
        return 0.0;
    }
    // Precision envelope: best precision at this rank or any later one.
    let mut envelope: Vec<f64> = curve.points.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut sum = 0.0;
    let mut k = 0;
    for r in 0..RECALL_POINTS {
        let level = r as f64 / (RECALL_POINTS - 1) as f64;
        while k < curve.points.len() && curve.points[k].recall < level {
            k += 1;
        }
        if k == curve.points.len() {
            break;
        }
        sum += envelope[k];
    }
    sum / RECALL_POINTS as f64
}

/// The F1-maximizing point of a curve. Ties go to the higher cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub confidence: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall <= 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn best_f1(curve: &PrCurve) -> OperatingPoint {
    let mut best = OperatingPoint {
        confidence: None,
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };
    for p in &curve.points {
        let f1 = f1_score(p.precision, p.recall);
        if f1 > best.f1 {
            best = OperatingPoint {
                confidence: Some(p.confidence),
                precision: p.precision,
                recall: p.recall,
                f1,
            };
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// AP at each of [`IOU_THRESHOLDS`].
    pub ap: Vec<f64>,
    pub map: f64,
    pub map50: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Confidence cutoff of the operating point, if any detection exists.
    pub operating_confidence: Option<f64>,
    pub total_gt: usize,
    pub num_detections: usize,
    /// Set when the evaluated images contain no ground truth at all.
    pub no_ground_truth: bool,
    /// False when AP increased somewhere along the IoU threshold sweep.
    pub ap_monotone: bool,
}

impl EvalResult {
    /// Builds a result from published summary numbers. AP at 0.5 is
    /// `map50`; the other nine thresholds share the value that makes their
    /// mean with `map50` equal `map`.
    pub fn from_summary(precision: f64, recall: f64, map: f64, map50: f64) -> Self {
        let rest = (10.0 * map - map50) / 9.0;
        let mut ap = vec![rest; IOU_THRESHOLDS.len()];
        ap[0] = map50;
        Self {
            ap,
            map,
            map50,
            precision,
            recall,
            f1: f1_score(precision, recall),
            operating_confidence: None,
            total_gt: 0,
            num_detections: 0,
            no_ground_truth: false,
            ap_monotone: rest <= map50,
        }
    }
}

/// Ground-truth count and pooled match records at one IoU threshold.
pub fn match_all(images: &[ImageEval], iou_threshold: f64) -> (Vec<MatchRecord>, usize) {
    let mut records = Vec::new();
    let mut total_gt = 0;
    for img in images {
        total_gt += img.ground_truth.len();
        records.extend(match_image(
            &img.image_id,
            img.dims,
            &img.detections,
            &img.ground_truth,
            iou_threshold,
        ));
    }
    (records, total_gt)
}

pub fn evaluate(images: &[ImageEval]) -> Result<EvalResult, EvalError> {
    let mut ids = BTreeSet::new();
    for img in images {
        if !ids.insert(img.image_id.as_str()) {
            return Err(EvalError::DuplicateImage(img.image_id.clone()));
        }
    }
    let mut ap = Vec::with_capacity(IOU_THRESHOLDS.len());
    let mut operating = None;
    let mut totals = (0, 0);
    for (k, &thr) in IOU_THRESHOLDS.iter().enumerate() {
        let (records, total_gt) = match_all(images, thr);
        let curve = pr_curve(&records, total_gt);
        ap.push(average_precision(&curve));
        if k == 0 {
            operating = Some(best_f1(&curve));
            totals = (total_gt, records.len());
        }
    }
    let op = operating.expect("at least one threshold");
    let map = ap.iter().sum::<f64>() / ap.len() as f64;
    let ap_monotone = ap.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    Ok(EvalResult {
        map,
        map50: ap[0],
        ap,
        precision: op.precision,
        recall: op.recall,
        f1: op.f1,
        operating_confidence: op.confidence,
        total_gt: totals.0,
        num_detections: totals.1,
        no_ground_truth: totals.0 == 0,
        ap_monotone,
    })
}

/// Raw detections for one test set, keyed by image id.
pub type PredictionSet = BTreeMap<String, Vec<Detection>>;

/// Pairs a manifest with predictions. Images without predictions get an
/// empty list; predictions for images outside the manifest are an error.
/// When `post` is given, detections are confidence-filtered and NMS'd first.
pub fn images_for(
    manifest: &DatasetManifest,
    predictions: &PredictionSet,
    post: Option<&PostprocessConfig>,
) -> Result<Vec<ImageEval>, EvalError> {
    let mut images = Vec::with_capacity(manifest.len());
    let mut known = BTreeSet::new();
    for e in &manifest.entries {
        let id = e.image_id();
        if !known.insert(id.clone()) {
            return Err(EvalError::DuplicateImage(id));
        }
        let raw = predictions.get(&id).map(Vec::as_slice).unwrap_or(&[]);
        let detections = match post {
            Some(cfg) => postprocess(raw, e.dims, cfg),
            None => raw.to_vec(),
        };
        images.push(ImageEval {
            image_id: id,
            dims: e.dims,
            ground_truth: e.annotations.clone(),
            detections,
        });
    }
    let unknown: Vec<String> = predictions
        .keys()
        .filter(|k| !known.contains(k.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(EvalError::UnknownImages(unknown));
    }
    Ok(images)
}

/// Models × test sets. A cell is `None` when no prediction set exists for
/// that pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossMatrix {
    pub models: Vec<String>,
    pub test_sets: Vec<String>,
    pub cells: Vec<Vec<Option<EvalResult>>>,
}

impl CrossMatrix {
    pub fn get(&self, model: &str, test_set: &str) -> Option<&EvalResult> {
        let m = self.models.iter().position(|x| x == model)?;
        let t = self.test_sets.iter().position(|x| x == test_set)?;
        self.cells[m][t].as_ref()
    }

    pub fn len(&self) -> usize {
        self.models.len() * self.test_sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Evaluates every (model, test set) pair. `predictions` lists, per model,
/// the prediction sets it has, keyed by test set name.
pub fn cross_evaluate(
    predictions: &[(String, Vec<(String, PredictionSet)>)],
    test_sets: &[(String, DatasetManifest)],
    post: Option<&PostprocessConfig>,
) -> Result<CrossMatrix, EvalError> {
    let mut matrix = CrossMatrix {
        models: predictions.iter().map(|(m, _)| m.clone()).collect(),
        test_sets: if predictions.is_empty() {
            Vec::new()
        } else {
            test_sets.iter().map(|(t, _)| t.clone()).collect()
        },
        cells: Vec::new(),
    };
    for (_, sets) in predictions {
        let mut row = vec![None; matrix.test_sets.len()];
        for (name, preds) in sets {
            let t = test_sets
                .iter()
                .position(|(n, _)| n == name)
                .ok_or_else(|| EvalError::UnknownTestSet(name.clone()))?;
            let images = images_for(&test_sets[t].1, preds, post)?;
            row[t] = Some(evaluate(&images)?);
        }
        matrix.cells.push(row);
    }
    Ok(matrix)
}
