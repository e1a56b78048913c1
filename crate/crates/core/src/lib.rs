//! Model-agnostic toolkit for evaluating, augmenting and benchmarking
//! single-class object detectors.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: box conventions and IoU.
//! - [`dataset`]: label/detection files, manifests and the seeded split.
//! - [`postprocess`]: confidence filtering and greedy NMS.
//! - [`evaluation`]: matching, PR curves, 101-point AP and mAP@[.5:.95].
//! - [`augment`]: HSV jitter, affine, flips, mosaic and mixup.
//! - [`synthfarm`]: procedural buoy scenes with exact ground truth.
//! - [`bench`]: latency/FPS/memory harness with a real-time verdict.
//! - [`report`]: CSV/text tables and SVG bar charts.

pub mod augment;
pub mod bench;
pub mod dataset;
pub mod evaluation;
pub mod geometry;
pub mod io;
pub mod postprocess;
pub mod report;
pub mod rng;
pub mod synthfarm;

pub use geometry::{BBoxAbs, BBoxNorm, ImageDims};
