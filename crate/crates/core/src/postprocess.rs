//! Confidence filtering and greedy class-aware non-maximum suppression.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Detection;
use crate::geometry::{BBoxAbs, ImageDims};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PostprocessConfig {
    pub conf_threshold: f64,
    pub nms_iou_threshold: f64,
    pub max_detections: usize,
}

impl Default for PostprocessConfig {
    fn default() -> Self {
        Self {
            conf_threshold: 0.001,
            nms_iou_threshold: 0.65,
            max_detections: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{name} must be in [0, 1], got {value}")]
    Threshold { name: &'static str, value: f64 },
    #[error("max_detections must be positive")]
    MaxDetections,
}

impl PostprocessConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, value) in [
            ("conf_threshold", self.conf_threshold),
            ("nms_iou_threshold", self.nms_iou_threshold),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::Threshold { name, value });
            }
        }
        if self.max_detections == 0 {
            return Err(ConfigError::MaxDetections);
        }
        Ok(())
    }
}

/// Keeps detections with `confidence >= conf_threshold`, in input order.
pub fn confidence_filter(dets: &[Detection], cfg: &PostprocessConfig) -> Vec<Detection> {
    dets.iter()
        .filter(|d| d.confidence >= cfg.conf_threshold)
        .copied()
        .collect()
}

/// Indices of `dets` sorted by confidence descending, ties by input order.
pub(crate) fn confidence_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].confidence.total_cmp(&dets[a].confidence));
    order
}

/// Greedy NMS on one image. A box is suppressed when its IoU with an
/// already-kept box of the same class is strictly greater than the
/// threshold. Output is sorted by confidence and capped at `max_detections`.
pub fn nms(dets: &[Detection], dims: ImageDims, cfg: &PostprocessConfig) -> Vec<Detection> {
    let boxes: Vec<BBoxAbs> = dets.iter().map(|d| d.bbox.to_abs(dims)).collect();
    let mut kept: Vec<usize> = Vec::new();
    for i in confidence_order(dets) {
        if kept.len() == cfg.max_detections {
            break;
        }
        let suppressed = kept.iter().any(|&k| {
            dets[k].class_id == dets[i].class_id
                && boxes[k].iou(&boxes[i]) > cfg.nms_iou_threshold
        });
        if !suppressed {
            kept.push(i);
        }
    }
    kept.into_iter().map(|i| dets[i]).collect()
}

/// Confidence filter followed by NMS.
pub fn postprocess(dets: &[Detection], dims: ImageDims, cfg: &PostprocessConfig) -> Vec<Detection> {
    nms(&confidence_filter(dets, cfg), dims, cfg)
}
