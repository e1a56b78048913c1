//! Projective transforms and image resampling.

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::geometry::BBoxAbs;

/// Row-major 3x3 homogeneous transform acting on column vectors `(x, y, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn translate(tx: f64, ty: f64) -> Self {
        Mat3([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])
    }

    pub fn scale(sx: f64, sy: f64) -> Self {
        Mat3([[sx, 0.0, 0.0], [0.0, sy, 0.0], [0.0, 0.0, 1.0]])
    }

    /// `self * rhs`: apply `rhs` first.
    pub fn then_after(&self, rhs: &Mat3) -> Mat3 {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        Mat3(out)
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.0;
        let w = m[2][0] * x + m[2][1] * y + m[2][2];
        (
            (m[0][0] * x + m[0][1] * y + m[0][2]) / w,
            (m[1][0] * x + m[1][1] * y + m[1][2]) / w,
        )
    }

    pub fn inverse(&self) -> Option<Mat3> {
        let m = &self.0;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        let det = m[0][0] * cof(1, 2, 1, 2) - m[0][1] * cof(1, 2, 0, 2) + m[0][2] * cof(1, 2, 0, 1);
        if det.abs() < 1e-12 {
            return None;
        }
        let inv = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        Some(Mat3(inv.map(|r| r.map(|v| v / det))))
    }

    pub fn is_identity(&self) -> bool {
        *self == Mat3::IDENTITY
    }

    /// Axis-aligned bounds of the transformed corners of `b`.
    pub fn map_box(&self, b: &BBoxAbs) -> BBoxAbs {
        let pts = [
            self.apply(b.x1, b.y1),
            self.apply(b.x2, b.y1),
            self.apply(b.x1, b.y2),
            self.apply(b.x2, b.y2),
        ];
        let (mut x1, mut y1, mut x2, mut y2) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for (x, y) in pts {
            x1 = x1.min(x);
            y1 = y1.min(y);
            x2 = x2.max(x);
            y2 = y2.max(y);
        }
        BBoxAbs { x1, y1, x2, y2 }
    }
}

/// Inverse-maps every output pixel center through `m` and samples the
/// source bilinearly. Taps outside the source read `fill`.
pub fn warp(src: &RgbImage, m: &Mat3, out_w: u32, out_h: u32, fill: u8) -> RgbImage {
    let inv = m.inverse().expect("augmentation transforms are invertible");
    let (sw, sh) = (src.width() as i64, src.height() as i64);
    let tap = |x: i64, y: i64| -> [f64; 3] {
        if x < 0 || y < 0 || x >= sw || y >= sh {
            [fill as f64; 3]
        } else {
            src.get_pixel(x as u32, y as u32).0.map(f64::from)
        }
    };
    RgbImage::from_fn(out_w, out_h, |x, y| {
        let (u, v) = inv.apply(x as f64 + 0.5, y as f64 + 0.5);
        let (u, v) = (u - 0.5, v - 0.5);
        if !u.is_finite() || !v.is_finite() {
            return Rgb([fill; 3]);
        }
        let (x0, y0) = (u.floor(), v.floor());
        let (fx, fy) = (u - x0, v - y0);
        let (x0, y0) = (x0 as i64, y0 as i64);
        let (p00, p10, p01, p11) = (tap(x0, y0), tap(x0 + 1, y0), tap(x0, y0 + 1), tap(x0 + 1, y0 + 1));
        let mut out = [0u8; 3];
        for c in 0..3 {
            let top = p00[c] + (p10[c] - p00[c]) * fx;
            let bot = p01[c] + (p11[c] - p01[c]) * fx;
            out[c] = (top + (bot - top) * fy).round().clamp(0.0, 255.0) as u8;
        }
        Rgb(out)
    })
}

/// Bilinear resize with pixel-center alignment (`x_src = (x + 0.5) * w / nw - 0.5`),
/// so a box scales by exactly `nw / w` horizontally and `nh / h` vertically.
pub fn resize(src: &RgbImage, nw: u32, nh: u32) -> RgbImage {
    if src.width() == nw && src.height() == nh {
        return src.clone();
    }
    let m = Mat3::scale(nw as f64 / src.width() as f64, nh as f64 / src.height() as f64);
    // Edge taps clamp to the border instead of the fill colour.
    let (sw, sh) = (src.width() as i64, src.height() as i64);
    let inv = m.inverse().expect("positive scale");
    RgbImage::from_fn(nw, nh, |x, y| {
        let (u, v) = inv.apply(x as f64 + 0.5, y as f64 + 0.5);
        let (u, v) = ((u - 0.5).clamp(0.0, (sw - 1) as f64), (v - 0.5).clamp(0.0, (sh - 1) as f64));
        let (x0, y0) = (u.floor() as i64, v.floor() as i64);
        let (fx, fy) = (u - x0 as f64, v - y0 as f64);
        let at = |x: i64, y: i64| src.get_pixel(x.min(sw - 1) as u32, y.min(sh - 1) as u32).0.map(f64::from);
        let (p00, p10, p01, p11) = (at(x0, y0), at(x0 + 1, y0), at(x0, y0 + 1), at(x0 + 1, y0 + 1));
        let mut out = [0u8; 3];
        for c in 0..3 {
            let top = p00[c] + (p10[c] - p00[c]) * fx;
            let bot = p01[c] + (p11[c] - p01[c]) * fx;
            out[c] = (top + (bot - top) * fy).round().clamp(0.0, 255.0) as u8;
        }
        Rgb(out)
    })
}
