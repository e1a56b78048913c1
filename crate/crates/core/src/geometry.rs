//! Bounding-box conventions and intersection-over-union.
//!
//! [`BBoxNorm`] (center/size as fractions of the image) is the storage and
//! interchange form used by label files. [`BBoxAbs`] (pixel corners) is the
//! compute form used for IoU, warping and rendering. Coordinates are
//! continuous; nothing is snapped to the pixel grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    DegenerateDims { width: u32, height: u32 },
    #[error("invalid normalized box (cx={cx}, cy={cy}, w={w}, h={h})")]
    InvalidNorm { cx: f64, cy: f64, w: f64, h: f64 },
    #[error("invalid absolute box ({x1}, {y1}, {x2}, {y2})")]
    InvalidAbs { x1: f64, y1: f64, x2: f64, y2: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageDims {
    pub width: u32,
    pub height: u32,
}

impl ImageDims {
    pub fn new(width: u32, height: u32) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::DegenerateDims { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn w(&self) -> f64 {
        self.width as f64
    }

    pub fn h(&self) -> f64 {
        self.height as f64
    }

    /// The whole image as an absolute box.
    pub fn full_box(&self) -> BBoxAbs {
        BBoxAbs {
            x1: 0.0,
            y1: 0.0,
            x2: self.w(),
            y2: self.h(),
        }
    }
}

/// Normalized center/size box. Invariants: `0 <= cx, cy <= 1`, `0 < w, h <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBoxNorm {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBoxNorm {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, GeometryError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let size = |v: f64| v > 0.0 && v <= 1.0;
        if unit(cx) && unit(cy) && size(w) && size(h) {
            Ok(Self { cx, cy, w, h })
        } else {
            Err(GeometryError::InvalidNorm { cx, cy, w, h })
        }
    }

    /// Pixel corners, unclamped: `x1 = (cx - w/2) * width`, and so on.
    pub fn to_abs(&self, dims: ImageDims) -> BBoxAbs {
        let (w, h) = (dims.w(), dims.h());
        BBoxAbs {
            x1: (self.cx - self.w / 2.0) * w,
            y1: (self.cy - self.h / 2.0) * h,
            x2: (self.cx + self.w / 2.0) * w,
            y2: (self.cy + self.h / 2.0) * h,
        }
    }

    /// Normalized corners clamped to `[0, 1]`.
    pub fn corners_clamped(&self) -> (f64, f64, f64, f64) {
        let c = |v: f64| v.clamp(0.0, 1.0);
        (
            c(self.cx - self.w / 2.0),
            c(self.cy - self.h / 2.0),
            c(self.cx + self.w / 2.0),
            c(self.cy + self.h / 2.0),
        )
    }

    pub fn iou(&self, other: &BBoxNorm) -> f64 {
        // IoU is invariant under per-axis scaling, so the unit square works.
        let unit = ImageDims {
            width: 1,
            height: 1,
        };
        self.to_abs(unit).iou(&other.to_abs(unit))
    }
}

/// Absolute pixel-corner box. Invariants: `x1 <= x2`, `y1 <= y2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBoxAbs {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBoxAbs {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        let finite = [x1, y1, x2, y2].iter().all(|v| v.is_finite());
        if finite && x1 <= x2 && y1 <= y2 {
            Ok(Self { x1, y1, x2, y2 })
        } else {
            Err(GeometryError::InvalidAbs { x1, y1, x2, y2 })
        }
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn intersection_area(&self, other: &BBoxAbs) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Intersection over union. Two zero-area boxes give 0 rather than 0/0.
    pub fn iou(&self, other: &BBoxAbs) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 || inter <= 0.0 {
            return 0.0;
        }
        (inter / union).clamp(0.0, 1.0)
    }

    /// Intersection with `bounds`; `None` when nothing of positive area remains.
    pub fn clip(&self, bounds: &BBoxAbs) -> Option<BBoxAbs> {
        let b = BBoxAbs {
            x1: self.x1.max(bounds.x1),
            y1: self.y1.max(bounds.y1),
            x2: self.x2.min(bounds.x2),
            y2: self.y2.min(bounds.y2),
        };
        (b.x2 > b.x1 && b.y2 > b.y1).then_some(b)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BBoxAbs {
        BBoxAbs {
            x1: self.x1 + dx,
            y1: self.y1 + dy,
            x2: self.x2 + dx,
            y2: self.y2 + dy,
        }
    }

    pub fn scale(&self, sx: f64, sy: f64) -> BBoxAbs {
        BBoxAbs {
            x1: self.x1 * sx,
            y1: self.y1 * sy,
            x2: self.x2 * sx,
            y2: self.y2 * sy,
        }
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x1 && x <= self.x2 && y >= self.y1 && y <= self.y2
    }

    /// Euclidean distance from a point to the box (0 when inside).
    pub fn distance_to_point(&self, x: f64, y: f64) -> f64 {
        let dx = (self.x1 - x).max(0.0).max(x - self.x2);
        let dy = (self.y1 - y).max(0.0).max(y - self.y2);
        dx.hypot(dy)
    }

    pub fn to_norm(&self, dims: ImageDims) -> Result<BBoxNorm, GeometryError> {
        let (w, h) = (dims.w(), dims.h());
        BBoxNorm::new(
            (self.x1 + self.x2) / 2.0 / w,
            (self.y1 + self.y2) / 2.0 / h,
            (self.x2 - self.x1) / w,
            (self.y2 - self.y1) / h,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn abs(x1: f64, y1: f64, x2: f64, y2: f64) -> BBoxAbs {
        BBoxAbs::new(x1, y1, x2, y2).unwrap()
    }

    fn dims(w: u32, h: u32) -> ImageDims {
        ImageDims::new(w, h).unwrap()
    }

    #[test]
    fn to_abs_examples() {
        let b = BBoxNorm::new(0.5, 0.5, 0.5, 0.5).unwrap();
        assert_eq!(b.to_abs(dims(640, 640)), abs(160.0, 160.0, 480.0, 480.0));

        let full = BBoxNorm::new(0.5, 0.5, 1.0, 1.0).unwrap();
        assert_eq!(full.to_abs(dims(1920, 1080)), abs(0.0, 0.0, 1920.0, 1080.0));
        assert_eq!(full.to_abs(dims(7, 3)), abs(0.0, 0.0, 7.0, 3.0));

        // (0.25 - 0.05) * 1920 = 384, (0.5 - 0.1) * 1080 = 432, ...
        let b = BBoxNorm::new(0.25, 0.5, 0.1, 0.2).unwrap().to_abs(dims(1920, 1080));
        for (got, want) in [(b.x1, 384.0), (b.y1, 432.0), (b.x2, 576.0), (b.y2, 648.0)] {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn degenerate_dims_rejected() {
        assert!(ImageDims::new(0, 10).is_err());
        assert!(ImageDims::new(10, 0).is_err());
    }

    #[test]
    fn invalid_boxes_rejected() {
        assert!(BBoxNorm::new(1.2, 0.5, 0.1, 0.1).is_err());
        assert!(BBoxNorm::new(0.5, 0.5, 0.0, 0.1).is_err());
        assert!(BBoxNorm::new(0.5, 0.5, 0.1, 1.5).is_err());
        assert!(BBoxNorm::new(f64::NAN, 0.5, 0.1, 0.1).is_err());
        assert!(BBoxAbs::new(2.0, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn iou_examples() {
        let b = abs(3.0, 4.0, 10.0, 12.5);
        assert_eq!(b.iou(&b), 1.0);
        assert_eq!(abs(0.0, 0.0, 1.0, 1.0).iou(&abs(5.0, 5.0, 6.0, 6.0)), 0.0);
        let v = abs(0.0, 0.0, 2.0, 2.0).iou(&abs(1.0, 1.0, 3.0, 3.0));
        assert!((v - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn zero_area_iou_is_zero() {
        let p = abs(1.0, 1.0, 1.0, 1.0);
        assert_eq!(p.iou(&p), 0.0);
        let line = abs(0.0, 0.0, 5.0, 0.0);
        assert_eq!(line.iou(&abs(0.0, 0.0, 5.0, 5.0)), 0.0);
        // Touching edges share no area.
        assert_eq!(abs(0.0, 0.0, 1.0, 1.0).iou(&abs(1.0, 0.0, 2.0, 1.0)), 0.0);
    }

    #[test]
    fn clip_and_distance() {
        let b = abs(-5.0, 2.0, 5.0, 20.0);
        assert_eq!(b.clip(&dims(10, 10).full_box()), Some(abs(0.0, 2.0, 5.0, 10.0)));
        assert_eq!(abs(11.0, 0.0, 12.0, 1.0).clip(&dims(10, 10).full_box()), None);
        assert_eq!(b.distance_to_point(0.0, 5.0), 0.0);
        assert!((b.distance_to_point(8.0, 24.0) - 5.0).abs() < 1e-12);
    }

    fn norm_box() -> impl Strategy<Value = BBoxNorm> {
        (0.0..=1.0f64, 0.0..=1.0f64, 1e-4..=1.0f64, 1e-4..=1.0f64)
            .prop_map(|(cx, cy, w, h)| BBoxNorm::new(cx, cy, w, h).unwrap())
    }

    fn abs_box() -> impl Strategy<Value = BBoxAbs> {
        (-50.0..50.0f64, -50.0..50.0f64, 0.01..40.0f64, 0.01..40.0f64)
            .prop_map(|(x, y, w, h)| abs(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn norm_abs_round_trip(b in norm_box(), w in 1u32..5000, h in 1u32..5000) {
            let d = dims(w, h);
            let back = b.to_abs(d).to_norm(d).unwrap();
            prop_assert!((back.cx - b.cx).abs() < 1e-9);
            prop_assert!((back.cy - b.cy).abs() < 1e-9);
            prop_assert!((back.w - b.w).abs() < 1e-9);
            prop_assert!((back.h - b.h).abs() < 1e-9);
        }

        #[test]
        fn clamped_corners_never_invert(b in norm_box()) {
            let (x1, y1, x2, y2) = b.corners_clamped();
            prop_assert!(x1 <= x2 && y1 <= y2);
            prop_assert!((0.0..=1.0).contains(&x1) && (0.0..=1.0).contains(&y2));
        }

        #[test]
        fn iou_symmetric_and_bounded(a in abs_box(), b in abs_box()) {
            let ab = a.iou(&b);
            prop_assert_eq!(ab, b.iou(&a));
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn iou_invariant_under_translation_and_scale(
            a in abs_box(), b in abs_box(),
            dx in -100.0..100.0f64, dy in -100.0..100.0f64, s in 0.1..10.0f64,
        ) {
            let base = a.iou(&b);
            let moved = a.translate(dx, dy).iou(&b.translate(dx, dy));
            let scaled = a.scale(s, s).iou(&b.scale(s, s));
            prop_assert!((base - moved).abs() < 1e-9);
            prop_assert!((base - scaled).abs() < 1e-9);
        }
    }
}
