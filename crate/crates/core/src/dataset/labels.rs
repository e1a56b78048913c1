//! Plain-text label and detection files.
//!
//! One object per line, whitespace separated, LF terminated:
//!
//! ```text
//! class cx cy w h          # label file
//! class cx cy w h conf     # detection file
//! ```
//!
//! Coordinates are normalized to the image. Written with six decimals.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BBoxNorm;

/// A ground-truth object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub class_id: u32,
    pub bbox: BBoxNorm,
}

/// A predicted object with its confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_id: u32,
    pub bbox: BBoxNorm,
    pub confidence: f64,
}

impl Annotation {
    pub fn new(class_id: u32, bbox: BBoxNorm) -> Self {
        Self { class_id, bbox }
    }
}

impl Detection {
    pub fn new(class_id: u32, bbox: BBoxNorm, confidence: f64) -> Self {
        Self {
            class_id,
            bbox,
            confidence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("expected {expected} fields, found {found}")]
    FieldCount { expected: usize, found: usize },
    #[error("field {field} is not a number: {token:?}")]
    NotNumeric { field: &'static str, token: String },
    #[error("field {field} out of range: {value}")]
    OutOfRange { field: &'static str, value: f64 },
}

const BOX_FIELDS: [&str; 4] = ["cx", "cy", "w", "h"];

pub fn parse_labels(text: &str) -> Result<Vec<Annotation>, ParseError> {
    parse_lines(text, 5)
        .map(|r| r.map(|(class_id, bbox, _)| Annotation { class_id, bbox }))
        .collect()
}

pub fn parse_detections(text: &str) -> Result<Vec<Detection>, ParseError> {
    parse_lines(text, 6)
        .map(|r| {
            r.map(|(class_id, bbox, conf)| Detection {
                class_id,
                bbox,
                confidence: conf.unwrap_or_default(),
            })
        })
        .collect()
}

fn parse_lines(
    text: &str,
    expected: usize,
) -> impl Iterator<Item = Result<(u32, BBoxNorm, Option<f64>), ParseError>> + '_ {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(move |(i, l)| parse_line(i + 1, l, expected))
}

fn parse_line(
    line: usize,
    text: &str,
    expected: usize,
) -> Result<(u32, BBoxNorm, Option<f64>), ParseError> {
    let err = |kind| ParseError { line, kind };
    let tokens: Vec<&str> = text.split_whitespace().collect();
    if tokens.len() != expected {
        return Err(err(ParseErrorKind::FieldCount {
            expected,
            found: tokens.len(),
        }));
    }
    let class_id: u32 = tokens[0].parse().map_err(|_| {
        err(ParseErrorKind::NotNumeric {
            field: "class",
            token: tokens[0].to_string(),
        })
    })?;

    let mut nums = [0.0f64; 4];
    for (k, field) in BOX_FIELDS.iter().enumerate() {
        nums[k] = number(tokens[k + 1], field).map_err(err)?;
    }
    let [cx, cy, w, h] = nums;
    for (field, v) in [("cx", cx), ("cy", cy)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(err(ParseErrorKind::OutOfRange { field, value: v }));
        }
    }
    for (field, v) in [("w", w), ("h", h)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(err(ParseErrorKind::OutOfRange { field, value: v }));
        }
    }
    let bbox = BBoxNorm { cx, cy, w, h };

    let conf = if expected == 6 {
        let c = number(tokens[5], "conf").map_err(err)?;
        if !(0.0..=1.0).contains(&c) {
            return Err(err(ParseErrorKind::OutOfRange {
                field: "conf",
                value: c,
            }));
        }
        Some(c)
    } else {
        None
    };
    Ok((class_id, bbox, conf))
}

fn number(token: &str, field: &'static str) -> Result<f64, ParseErrorKind> {
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ParseErrorKind::NotNumeric {
            field,
            token: token.to_string(),
        }),
    }
}

pub fn serialize_labels(annotations: &[Annotation]) -> String {
    let mut out = String::new();
    for a in annotations {
        let b = &a.bbox;
        let _ = writeln!(
            out,
            "{} {:.6} {:.6} {:.6} {:.6}",
            a.class_id, b.cx, b.cy, b.w, b.h
        );
    }
    out
}

pub fn serialize_detections(detections: &[Detection]) -> String {
    let mut out = String::new();
    for d in detections {
        let b = &d.bbox;
        let _ = writeln!(
            out,
            "{} {:.6} {:.6} {:.6} {:.6} {:.6}",
            d.class_id, b.cx, b.cy, b.w, b.h, d.confidence
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_line() {
        let a = parse_labels("0 0.5 0.5 0.5 0.5").unwrap();
        assert_eq!(
            a,
            vec![Annotation::new(0, BBoxNorm::new(0.5, 0.5, 0.5, 0.5).unwrap())]
        );
    }

    #[test]
    fn empty_file_has_no_objects() {
        assert!(parse_labels("").unwrap().is_empty());
        assert!(parse_labels("\n  \n").unwrap().is_empty());
    }

    #[test]
    fn wrong_field_count_reports_line() {
        let e = parse_labels("0 0.5 0.5 0.5").unwrap_err();
        assert_eq!(e.line, 1);
        assert_eq!(
            e.kind,
            ParseErrorKind::FieldCount {
                expected: 5,
                found: 4
            }
        );
        let e = parse_labels("0 0.5 0.5 0.5 0.5\n\n0 0.5 x 0.1 0.1").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(matches!(e.kind, ParseErrorKind::NotNumeric { field: "cy", .. }));
    }

    #[test]
    fn out_of_range_coordinates() {
        let e = parse_labels("0 1.5 0.5 0.1 0.1").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::OutOfRange { field: "cx", .. }));
        let e = parse_labels("0 0.5 0.5 0 0.1").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::OutOfRange { field: "w", .. }));
        assert!(parse_labels("-1 0.5 0.5 0.1 0.1").is_err());
        assert!(parse_labels("0 nan 0.5 0.1 0.1").is_err());
    }

    #[test]
    fn detections() {
        let d = parse_detections("0 0.5 0.5 0.2 0.2 0.9").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].confidence, 0.9);

        let e = parse_detections("0 0.5 0.5 0.2 0.2 1.5").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::OutOfRange { field: "conf", .. }));

        let d = parse_detections("0 0.1 0.1 0.1 0.1 0.3\n0 0.9 0.9 0.1 0.1 0.7\n").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].confidence, 0.3);
        assert_eq!(d[1].confidence, 0.7);
    }

    #[test]
    fn six_decimal_output() {
        let a = [Annotation::new(0, BBoxNorm::new(0.5, 0.25, 0.125, 1.0).unwrap())];
        assert_eq!(serialize_labels(&a), "0 0.500000 0.250000 0.125000 1.000000\n");
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(
            rows in proptest::collection::vec(
                (0u32..3, 0.0..=1.0f64, 0.0..=1.0f64, 0.001..=1.0f64, 0.001..=1.0f64, 0.0..=1.0f64),
                0..20,
            ),
            noise in "[ \t]{0,3}",
        ) {
            let dets: Vec<Detection> = rows
                .iter()
                .map(|&(c, cx, cy, w, h, conf)| Detection::new(c, BBoxNorm { cx, cy, w, h }, conf))
                .collect();
            let text = serialize_detections(&dets).replace(' ', &format!(" {noise}"));
            let back = parse_detections(&text).unwrap();
            prop_assert_eq!(back.len(), dets.len());
            for (a, b) in back.iter().zip(&dets) {
                prop_assert_eq!(a.class_id, b.class_id);
                for (x, y) in [
                    (a.bbox.cx, b.bbox.cx), (a.bbox.cy, b.bbox.cy),
                    (a.bbox.w, b.bbox.w), (a.bbox.h, b.bbox.h), (a.confidence, b.confidence),
                ] {
                    prop_assert!((x - y).abs() <= 5e-7);
                }
            }
            // Canonical form is a fixed point.
            prop_assert_eq!(serialize_detections(&back), serialize_detections(&parse_detections(&serialize_detections(&back)).unwrap()));
        }
    }
}
