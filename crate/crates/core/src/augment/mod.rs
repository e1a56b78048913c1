//! Image-and-label augmentation: HSV jitter, random affine (translate,
//! scale, rotation, shear, perspective), flips, 4-image mosaic and mixup.
//!
//! Defaults follow the training-time recipe used for the buoy detectors:
//! HSV gains (0.015, 0.7, 0.4), translate 0.1, scale 0.5, left-right flip
//! 0.5, mosaic 1.0, mixup 0.05, everything else 0.
//!
//! Sampling conventions: multiplicative HSV factors are uniform in
//! `[1 - g, 1 + g]`; the affine scale is uniform in `[1 - scale, 1 + scale]`
//! and translation uniform in `±translate * dim` about the output center;
//! the mixup weight is `Beta(8, 8)`; the mosaic center is uniform over the
//! central half of the 2x canvas. After every geometric op, boxes are
//! re-axis-aligned, clipped, and dropped when they fail [`BoxFilter`].
//!
//! [`Pipeline`] applies the whole recipe deterministically per
//! `(seed, index)` and records, for every output label, which source label
//! it came from and the pixel transform that carried it there.

mod color;
mod warp;

use image::RgbImage;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use color::apply_hsv_factors;
pub use warp::{resize, warp, Mat3};

use crate::dataset::Annotation;
use crate::geometry::{BBoxAbs, BBoxNorm, ImageDims};
use crate::rng::SplitMix64;

/// Border fill for warps, mosaic canvases and letterbox padding.
pub const FILL: u8 = 114;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentError {
    #[error("mosaic needs exactly 4 samples, got {0}")]
    SampleCount(usize),
    #[error("invalid augmentation config: {0}")]
    Config(String),
    #[error("sample source is empty")]
    EmptySource,
}

/// Post-transform box filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoxFilter {
    /// Minimum clipped area in px².
    pub min_area: f64,
    /// Minimum clipped area as a fraction of the unclipped transformed box.
    pub min_visibility: f64,
    /// Maximum `max(w/h, h/w)` of the clipped box.
    pub max_aspect: f64,
}

impl Default for BoxFilter {
    fn default() -> Self {
        Self {
            min_area: 2.0,
            min_visibility: 0.1,
            max_aspect: 20.0,
        }
    }
}

impl BoxFilter {
    /// Clips `transformed` to `canvas` and applies the filter.
    pub fn apply(&self, transformed: &BBoxAbs, canvas: &BBoxAbs) -> Option<BBoxAbs> {
        let clipped = transformed.clip(canvas)?;
        let (w, h) = (clipped.width(), clipped.height());
        let area = clipped.area();
        let pre = transformed.area();
        let ok = area >= self.min_area
            && pre > 0.0
            && area / pre >= self.min_visibility
            && (w / h).max(h / w) <= self.max_aspect;
        ok.then_some(clipped)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub hsv_h: f64,
    pub hsv_s: f64,
    pub hsv_v: f64,
    pub degrees: f64,
    pub translate: f64,
    pub scale: f64,
    pub shear: f64,
    pub perspective: f64,
    pub flip_ud_prob: f64,
    pub flip_lr_prob: f64,
    pub mosaic_prob: f64,
    pub mixup_prob: f64,
    pub rng_seed: u64,
    /// Output size; `None` keeps each primary sample's own size.
    pub img_size: Option<ImageDims>,
    /// Mosaic center range as a fraction of the target size, per axis.
    pub mosaic_center: (f64, f64),
    /// Symmetric Beta parameter for the mixup weight.
    pub mixup_beta: f64,
    pub box_filter: BoxFilter,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            hsv_h: 0.015,
            hsv_s: 0.7,
            hsv_v: 0.4,
            degrees: 0.0,
            translate: 0.1,
            scale: 0.5,
            shear: 0.0,
            perspective: 0.0,
            flip_ud_prob: 0.0,
            flip_lr_prob: 0.5,
            mosaic_prob: 1.0,
            mixup_prob: 0.05,
            rng_seed: 0,
            img_size: None,
            mosaic_center: (0.5, 1.5),
            mixup_beta: 8.0,
            box_filter: BoxFilter::default(),
        }
    }
}

impl AugmentConfig {
    /// Every op disabled or at zero magnitude.
    pub fn identity() -> Self {
        Self {
            hsv_h: 0.0,
            hsv_s: 0.0,
            hsv_v: 0.0,
            translate: 0.0,
            scale: 0.0,
            flip_lr_prob: 0.0,
            mosaic_prob: 0.0,
            mixup_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        let probs = [
            ("flip_ud_prob", self.flip_ud_prob),
            ("flip_lr_prob", self.flip_lr_prob),
            ("mosaic_prob", self.mosaic_prob),
            ("mixup_prob", self.mixup_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(AugmentError::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        let gains = [
            ("hsv_h", self.hsv_h),
            ("hsv_s", self.hsv_s),
            ("hsv_v", self.hsv_v),
            ("degrees", self.degrees),
            ("translate", self.translate),
            ("scale", self.scale),
            ("shear", self.shear),
            ("perspective", self.perspective),
        ];
        for (name, g) in gains {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(AugmentError::Config(format!("{name} must be >= 0, got {g}")));
            }
        }
        if self.scale >= 1.0 {
            return Err(AugmentError::Config("scale must be < 1".into()));
        }
        if self.mixup_beta <= 0.0 {
            return Err(AugmentError::Config("mixup_beta must be > 0".into()));
        }
        Ok(())
    }
}

/// An image with its labels. Boxes are valid for the image's dims.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: RgbImage,
    pub annotations: Vec<Annotation>,
}

impl Sample {
    pub fn dims(&self) -> ImageDims {
        ImageDims {
            width: self.image.width(),
            height: self.image.height(),
        }
    }
}

/// Where an output label came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelTrace {
    /// Index of the source sample.
    pub source: usize,
    /// Index of the annotation within that sample.
    pub annotation: usize,
    /// Source pixel coordinates → output pixel coordinates.
    pub transform: Mat3,
    /// Part of the source image (pixel coordinates) still in frame.
    pub window: BBoxAbs,
}

/// A record of one applied op, for provenance sidecars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum OpRecord {
    Letterbox { from: ImageDims, to: ImageDims },
    Mosaic { sources: [usize; 4], center: (f64, f64) },
    Mixup { lambda: f64, partner_sources: Vec<usize> },
    Affine { matrix: Mat3 },
    Hsv { factors: (f64, f64, f64) },
    FlipUd,
    FlipLr,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Obj {
    class_id: u32,
    abs: BBoxAbs,
    /// Original normalized box while no geometric op has touched it.
    norm: Option<BBoxNorm>,
    trace: LabelTrace,
}

/// Working representation: pixel-space boxes plus traces.
#[derive(Debug, Clone)]
struct Work {
    image: RgbImage,
    objects: Vec<Obj>,
    sources: Vec<usize>,
}

impl Work {
    fn from_sample(s: &Sample, source: usize) -> Work {
        let dims = s.dims();
        Work {
            objects: s
                .annotations
                .iter()
                .enumerate()
                .map(|(k, a)| Obj {
                    class_id: a.class_id,
                    abs: a.bbox.to_abs(dims),
                    norm: Some(a.bbox),
                    trace: LabelTrace {
                        source,
                        annotation: k,
                        transform: Mat3::IDENTITY,
                        window: dims.full_box(),
                    },
                })
                .collect(),
            image: s.image.clone(),
            sources: vec![source],
        }
    }

    fn dims(&self) -> ImageDims {
        ImageDims {
            width: self.image.width(),
            height: self.image.height(),
        }
    }

    fn into_parts(self) -> (Sample, Vec<LabelTrace>) {
        let dims = self.dims();
        let mut annotations = Vec::with_capacity(self.objects.len());
        let mut traces = Vec::with_capacity(self.objects.len());
        for o in self.objects {
            let bbox = match o.norm {
                Some(n) => Some(n),
                None => o.abs.to_norm(dims).ok(),
            };
            if let Some(bbox) = bbox {
                annotations.push(Annotation::new(o.class_id, bbox));
                traces.push(o.trace);
            }
        }
        (
            Sample {
                image: self.image,
                annotations,
            },
            traces,
        )
    }

    /// Applies a geometric map to every box, then clips and filters against
    /// the new canvas. `region` is the part of the pre-map image that
    /// survives, in pre-map coordinates.
    fn map_objects(&mut self, m: &Mat3, canvas: &BBoxAbs, region: &BBoxAbs, filter: &BoxFilter) {
        self.objects.retain_mut(|o| {
            let Some(b) = filter.apply(&m.map_box(&o.abs), canvas) else {
                return false;
            };
            o.abs = b;
            o.norm = None;
            o.trace.window = restrict_window(&o.trace, region);
            o.trace.transform = m.then_after(&o.trace.transform);
            true
        });
    }
}

/// Intersects a trace's window with `region` (given in the trace's current
/// output coordinates) pulled back to source coordinates.
fn restrict_window(trace: &LabelTrace, region: &BBoxAbs) -> BBoxAbs {
    let back = trace
        .transform
        .inverse()
        .map(|inv| inv.map_box(region))
        .unwrap_or(trace.window);
    let w = &trace.window;
    BBoxAbs {
        x1: w.x1.max(back.x1),
        y1: w.y1.max(back.y1),
        x2: w.x2.min(back.x2).max(w.x1.max(back.x1)),
        y2: w.y2.min(back.y2).max(w.y1.max(back.y1)),
    }
}

fn hsv_factors(gains: (f64, f64, f64), rng: &mut SplitMix64) -> (f64, f64, f64) {
    let mut f = |g: f64| 1.0 + rng.uniform(-1.0, 1.0) * g;
    (f(gains.0), f(gains.1), f(gains.2))
}

fn work_hsv(w: &mut Work, gains: (f64, f64, f64), rng: &mut SplitMix64) -> OpRecord {
    let factors = hsv_factors(gains, rng);
    w.image = apply_hsv_factors(&w.image, factors);
    OpRecord::Hsv { factors }
}

fn work_flip_lr(w: &mut Work) {
    let dims = w.dims();
    image::imageops::flip_horizontal_in_place(&mut w.image);
    let m = Mat3([[-1.0, 0.0, dims.w()], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    for o in &mut w.objects {
        o.abs = BBoxAbs {
            x1: dims.w() - o.abs.x2,
            y1: o.abs.y1,
            x2: dims.w() - o.abs.x1,
            y2: o.abs.y2,
        };
        o.norm = o.norm.map(|n| BBoxNorm { cx: 1.0 - n.cx, ..n });
        o.trace.transform = m.then_after(&o.trace.transform);
    }
}

fn work_flip_ud(w: &mut Work) {
    let dims = w.dims();
    image::imageops::flip_vertical_in_place(&mut w.image);
    let m = Mat3([[1.0, 0.0, 0.0], [0.0, -1.0, dims.h()], [0.0, 0.0, 1.0]]);
    for o in &mut w.objects {
        o.abs = BBoxAbs {
            x1: o.abs.x1,
            y1: dims.h() - o.abs.y2,
            x2: o.abs.x2,
            y2: dims.h() - o.abs.y1,
        };
        o.norm = o.norm.map(|n| BBoxNorm { cy: 1.0 - n.cy, ..n });
        o.trace.transform = m.then_after(&o.trace.transform);
    }
}

/// Draws the random affine/perspective matrix mapping an `input`-sized
/// image onto an `output`-sized canvas. Always consumes eight draws.
fn affine_matrix(cfg: &AugmentConfig, input: ImageDims, output: ImageDims, rng: &mut SplitMix64) -> Mat3 {
    let center = Mat3::translate(-input.w() / 2.0, -input.h() / 2.0);
    let px = rng.uniform(-cfg.perspective, cfg.perspective);
    let py = rng.uniform(-cfg.perspective, cfg.perspective);
    let persp = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [px, py, 1.0]]);
    let angle = rng.uniform(-cfg.degrees, cfg.degrees).to_radians();
    let s = rng.uniform(1.0 - cfg.scale, 1.0 + cfg.scale);
    let (sin, cos) = if angle == 0.0 { (0.0, 1.0) } else { angle.sin_cos() };
    let rot = Mat3([[s * cos, -s * sin, 0.0], [s * sin, s * cos, 0.0], [0.0, 0.0, 1.0]]);
    let shx = rng.uniform(-cfg.shear, cfg.shear).to_radians().tan();
    let shy = rng.uniform(-cfg.shear, cfg.shear).to_radians().tan();
    let shear = Mat3([[1.0, shx, 0.0], [shy, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    let tx = rng.uniform(0.5 - cfg.translate, 0.5 + cfg.translate) * output.w();
    let ty = rng.uniform(0.5 - cfg.translate, 0.5 + cfg.translate) * output.h();
    let trans = Mat3::translate(tx, ty);
    trans
        .then_after(&shear)
        .then_after(&rot)
        .then_after(&persp)
        .then_after(&center)
}

fn work_affine_with(w: &mut Work, m: &Mat3, output: ImageDims, filter: &BoxFilter) {
    if m.is_identity() && w.dims() == output {
        return;
    }
    let region = m
        .inverse()
        .map(|inv| inv.map_box(&output.full_box()))
        .unwrap_or_else(|| w.dims().full_box());
    w.image = warp(&w.image, m, output.width, output.height, FILL);
    let canvas = output.full_box();
    w.objects.retain_mut(|o| {
        let Some(b) = filter.apply(&m.map_box(&o.abs), &canvas) else {
            return false;
        };
        o.abs = b;
        o.norm = None;
        o.trace.window = restrict_window(&o.trace, &region);
        o.trace.transform = m.then_after(&o.trace.transform);
        true
    });
}

fn work_affine(w: &mut Work, cfg: &AugmentConfig, output: ImageDims, rng: &mut SplitMix64) -> OpRecord {
    let m = affine_matrix(cfg, w.dims(), output, rng);
    work_affine_with(w, &m, output, &cfg.box_filter);
    OpRecord::Affine { matrix: m }
}

/// Resizes to fit `target` keeping aspect, padding the rest with [`FILL`].
fn work_letterbox(w: &mut Work, target: ImageDims, filter: &BoxFilter) -> Option<OpRecord> {
    let from = w.dims();
    if from == target {
        return None;
    }
    let r = (target.w() / from.w()).min(target.h() / from.h());
    let nw = ((from.w() * r).round() as u32).clamp(1, target.width);
    let nh = ((from.h() * r).round() as u32).clamp(1, target.height);
    let (dx, dy) = ((target.width - nw) / 2, (target.height - nh) / 2);
    let resized = resize(&w.image, nw, nh);
    let mut canvas = RgbImage::from_pixel(target.width, target.height, image::Rgb([FILL; 3]));
    image::imageops::replace(&mut canvas, &resized, dx as i64, dy as i64);
    let m = Mat3::translate(dx as f64, dy as f64).then_after(&Mat3::scale(nw as f64 / from.w(), nh as f64 / from.h()));
    w.image = canvas;
    w.map_objects(&m, &target.full_box(), &from.full_box(), filter);
    Some(OpRecord::Letterbox { from, to: target })
}

/// Places four works on a `2 * target` canvas around `center`.
fn work_mosaic(parts: Vec<Work>, target: ImageDims, center: (f64, f64), filter: &BoxFilter) -> Work {
    let (cw, ch) = (2 * target.width as i64, 2 * target.height as i64);
    let (xc, yc) = (center.0.floor() as i64, center.1.floor() as i64);
    let mut canvas = RgbImage::from_pixel(cw as u32, ch as u32, image::Rgb([FILL; 3]));
    let mut objects = Vec::new();
    let mut sources = Vec::new();
    for (i, mut part) in parts.into_iter().enumerate() {
        let from = part.dims();
        let r = (target.w() / from.w()).min(target.h() / from.h());
        let nw = ((from.w() * r).round() as i64).max(1);
        let nh = ((from.h() * r).round() as i64).max(1);
        let resized = resize(&part.image, nw as u32, nh as u32);
        // a: placement on the canvas; b: the matching crop of the resized input.
        let (x1a, y1a, _x2a, _y2a, x1b, y1b, x2b, y2b) = match i {
            0 => {
                let (x1a, y1a) = ((xc - nw).max(0), (yc - nh).max(0));
                (x1a, y1a, xc, yc, nw - (xc - x1a), nh - (yc - y1a), nw, nh)
            }
            1 => {
                let (y1a, x2a) = ((yc - nh).max(0), (xc + nw).min(cw));
                (xc, y1a, x2a, yc, 0, nh - (yc - y1a), nw.min(x2a - xc), nh)
            }
            2 => {
                let (x1a, y2a) = ((xc - nw).max(0), (yc + nh).min(ch));
                (x1a, yc, xc, y2a, nw - (xc - x1a), 0, nw, (y2a - yc).min(nh))
            }
            _ => {
                let (x2a, y2a) = ((xc + nw).min(cw), (yc + nh).min(ch));
                (xc, yc, x2a, y2a, 0, 0, (x2a - xc).min(nw), (y2a - yc).min(nh))
            }
        };
        let (cwid, chei) = (x2b - x1b, y2b - y1b);
        if cwid > 0 && chei > 0 {
            let crop = image::imageops::crop_imm(&resized, x1b as u32, y1b as u32, cwid as u32, chei as u32).to_image();
            image::imageops::replace(&mut canvas, &crop, x1a, y1a);
        }
        let (padw, padh) = ((x1a - x1b) as f64, (y1a - y1b) as f64);
        let m = Mat3::translate(padw, padh).then_after(&Mat3::scale(nw as f64 / from.w(), nh as f64 / from.h()));
        // Surviving part of the input, in its own pre-resize coordinates.
        let region = BBoxAbs {
            x1: x1b as f64 * from.w() / nw as f64,
            y1: y1b as f64 * from.h() / nh as f64,
            x2: x2b.max(x1b) as f64 * from.w() / nw as f64,
            y2: y2b.max(y1b) as f64 * from.h() / nh as f64,
        };
        let placed = BBoxAbs {
            x1: x1a as f64,
            y1: y1a as f64,
            x2: (x1a + cwid.max(0)) as f64,
            y2: (y1a + chei.max(0)) as f64,
        };
        part.map_objects(&m, &placed, &region, filter);
        objects.extend(part.objects);
        sources.extend(part.sources);
    }
    Work {
        image: canvas,
        objects,
        sources,
    }
}

fn mixup_images(a: &RgbImage, b: &RgbImage, lambda: f64) -> RgbImage {
    let mut out = a.clone();
    for (o, q) in out.pixels_mut().zip(b.pixels()) {
        for c in 0..3 {
            let v = lambda * o.0[c] as f64 + (1.0 - lambda) * q.0[c] as f64;
            o.0[c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

fn work_mixup(a: &mut Work, mut b: Work, lambda: f64, filter: &BoxFilter) -> OpRecord {
    if b.dims() != a.dims() {
        let (from, to) = (b.dims(), a.dims());
        b.image = resize(&b.image, to.width, to.height);
        let m = Mat3::scale(to.w() / from.w(), to.h() / from.h());
        b.map_objects(&m, &to.full_box(), &from.full_box(), filter);
    }
    a.image = mixup_images(&a.image, &b.image, lambda);
    a.objects.extend(b.objects);
    let partner_sources = b.sources.clone();
    a.sources.extend(b.sources);
    OpRecord::Mixup { lambda, partner_sources }
}

fn draw_lambda(beta: f64, rng: &mut SplitMix64) -> f64 {
    Beta::new(beta, beta).expect("positive beta").sample(rng)
}

fn mosaic_center(cfg: &AugmentConfig, target: ImageDims, rng: &mut SplitMix64) -> (f64, f64) {
    let (lo, hi) = cfg.mosaic_center;
    (
        rng.uniform(lo * target.w(), hi * target.w()),
        rng.uniform(lo * target.h(), hi * target.h()),
    )
}

// ---- public single-op API -------------------------------------------------

/// Random HSV jitter with gains `(h, s, v)`. Boxes are unchanged.
pub fn hsv_jitter(s: &Sample, gains: (f64, f64, f64), rng: &mut SplitMix64) -> Sample {
    let factors = hsv_factors(gains, rng);
    Sample {
        image: apply_hsv_factors(&s.image, factors),
        annotations: s.annotations.clone(),
    }
}

/// Mirrors the image horizontally; each box's `cx` becomes `1 - cx`.
pub fn flip_lr(s: &Sample) -> Sample {
    Sample {
        image: image::imageops::flip_horizontal(&s.image),
        annotations: s
            .annotations
            .iter()
            .map(|a| Annotation::new(a.class_id, BBoxNorm { cx: 1.0 - a.bbox.cx, ..a.bbox }))
            .collect(),
    }
}

/// Mirrors the image vertically; each box's `cy` becomes `1 - cy`.
pub fn flip_ud(s: &Sample) -> Sample {
    Sample {
        image: image::imageops::flip_vertical(&s.image),
        annotations: s
            .annotations
            .iter()
            .map(|a| Annotation::new(a.class_id, BBoxNorm { cy: 1.0 - a.bbox.cy, ..a.bbox }))
            .collect(),
    }
}

/// Random affine on a same-sized canvas.
pub fn affine(s: &Sample, cfg: &AugmentConfig, rng: &mut SplitMix64) -> Sample {
    let mut w = Work::from_sample(s, 0);
    let dims = w.dims();
    work_affine(&mut w, cfg, dims, rng);
    w.into_parts().0
}

/// Applies a fixed pixel transform onto an `output`-sized canvas.
pub fn affine_with_matrix(s: &Sample, m: &Mat3, output: ImageDims, filter: &BoxFilter) -> Sample {
    let mut w = Work::from_sample(s, 0);
    work_affine_with(&mut w, m, output, filter);
    w.into_parts().0
}

/// 4-image mosaic on a `2 * target` canvas with a random center.
pub fn mosaic(
    samples: &[Sample],
    target: ImageDims,
    cfg: &AugmentConfig,
    rng: &mut SplitMix64,
) -> Result<Sample, AugmentError> {
    let center = mosaic_center(cfg, target, rng);
    mosaic_at(samples, target, center, &cfg.box_filter)
}

/// 4-image mosaic with an explicit center on the `2 * target` canvas.
pub fn mosaic_at(
    samples: &[Sample],
    target: ImageDims,
    center: (f64, f64),
    filter: &BoxFilter,
) -> Result<Sample, AugmentError> {
    if samples.len() != 4 {
        return Err(AugmentError::SampleCount(samples.len()));
    }
    let parts = samples.iter().enumerate().map(|(i, s)| Work::from_sample(s, i)).collect();
    Ok(work_mosaic(parts, target, center, filter).into_parts().0)
}

/// Blends `a` and `b` with a `Beta(8, 8)` weight; labels are the union.
/// `b` is resized to `a`'s dims when they differ.
pub fn mixup(a: &Sample, b: &Sample, rng: &mut SplitMix64) -> Sample {
    let lambda = draw_lambda(AugmentConfig::default().mixup_beta, rng);
    mixup_with_lambda(a, b, lambda)
}

pub fn mixup_with_lambda(a: &Sample, b: &Sample, lambda: f64) -> Sample {
    let mut wa = Work::from_sample(a, 0);
    work_mixup(&mut wa, Work::from_sample(b, 1), lambda, &BoxFilter::default());
    wa.into_parts().0
}

// ---- pipeline -------------------------------------------------------------

/// Random-access source of samples for the pipeline.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;
    fn get(&self, index: usize) -> Sample;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl SampleSource for [Sample] {
    fn len(&self) -> usize {
        <[Sample]>::len(self)
    }

    fn get(&self, index: usize) -> Sample {
        self[index].clone()
    }
}

impl SampleSource for Vec<Sample> {
    fn len(&self) -> usize {
        <[Sample]>::len(self)
    }

    fn get(&self, index: usize) -> Sample {
        self[index].clone()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub sample: Sample,
    /// Parallel to `sample.annotations`.
    pub traces: Vec<LabelTrace>,
    pub ops: Vec<OpRecord>,
}

/// Deterministic augmentation stream over a sample source.
pub struct Pipeline<'a, S: SampleSource + ?Sized> {
    source: &'a S,
    cfg: AugmentConfig,
}

impl<'a, S: SampleSource + ?Sized> Pipeline<'a, S> {
    pub fn new(source: &'a S, cfg: AugmentConfig) -> Result<Self, AugmentError> {
        cfg.validate()?;
        if source.is_empty() {
            return Err(AugmentError::EmptySource);
        }
        Ok(Self { source, cfg })
    }

    pub fn config(&self) -> &AugmentConfig {
        &self.cfg
    }

    /// Output `index`. Depends only on `(rng_seed, index)` and the source.
    pub fn sample(&self, index: usize) -> Augmented {
        let cfg = &self.cfg;
        let n = self.source.len();
        let mut rng = SplitMix64::derive(cfg.rng_seed, &[index as u64]);
        let primary = index % n;
        let load = |i: usize| Work::from_sample(&self.source.get(i), i);
        let first = load(primary);
        let target = cfg.img_size.unwrap_or(first.dims());
        let mut ops = Vec::new();

        let mut work = if rng.chance(cfg.mosaic_prob) {
            let mut w = self.mosaic_from(first, target, &mut rng, &mut ops);
            if rng.chance(cfg.mixup_prob) {
                let partner_first = load(rng.below(n as u64) as usize);
                let mut scratch = Vec::new();
                let partner = self.mosaic_from(partner_first, target, &mut rng, &mut scratch);
                let lambda = draw_lambda(cfg.mixup_beta, &mut rng);
                ops.push(work_mixup(&mut w, partner, lambda, &cfg.box_filter));
            }
            w
        } else {
            let mut w = first;
            ops.extend(work_letterbox(&mut w, target, &cfg.box_filter));
            if rng.chance(cfg.mixup_prob) {
                let mut partner = load(rng.below(n as u64) as usize);
                work_letterbox(&mut partner, target, &cfg.box_filter);
                let lambda = draw_lambda(cfg.mixup_beta, &mut rng);
                ops.push(work_mixup(&mut w, partner, lambda, &cfg.box_filter));
            }
            w
        };

        let rec = work_affine(&mut work, cfg, target, &mut rng);
        if !matches!(rec, OpRecord::Affine { matrix } if matrix.is_identity()) {
            ops.push(rec);
        }
        let rec = work_hsv(&mut work, (cfg.hsv_h, cfg.hsv_s, cfg.hsv_v), &mut rng);
        if !matches!(rec, OpRecord::Hsv { factors } if factors == (1.0, 1.0, 1.0)) {
            ops.push(rec);
        }
        if rng.chance(cfg.flip_ud_prob) {
            work_flip_ud(&mut work);
            ops.push(OpRecord::FlipUd);
        }
        if rng.chance(cfg.flip_lr_prob) {
            work_flip_lr(&mut work);
            ops.push(OpRecord::FlipLr);
        }
        let (sample, traces) = work.into_parts();
        Augmented { sample, traces, ops }
    }

    fn mosaic_from(&self, first: Work, target: ImageDims, rng: &mut SplitMix64, ops: &mut Vec<OpRecord>) -> Work {
        let n = self.source.len() as u64;
        let mut sources = [first.sources[0], 0, 0, 0];
        let mut parts = vec![first];
        for slot in sources.iter_mut().skip(1) {
            *slot = rng.below(n) as usize;
            parts.push(Work::from_sample(&self.source.get(*slot), *slot));
        }
        let center = mosaic_center(&self.cfg, target, rng);
        ops.push(OpRecord::Mosaic { sources, center });
        work_mosaic(parts, target, center, &self.cfg.box_filter)
    }

    /// The first `count` outputs in order.
    pub fn iter(&self, count: usize) -> impl Iterator<Item = Augmented> + '_ {
        (0..count).map(move |i| self.sample(i))
    }
}
