//! Seeded train/val/test partitioning.
//!
//! Entry indices are shuffled with Fisher–Yates driven by
//! [`SplitMix64`](crate::rng::SplitMix64) seeded with `SplitSpec::seed`.
//! The first `floor(train * N)` shuffled positions become train, the next
//! `floor(val * N)` become val, and the remainder is test. Entries keep
//! their original order in the output; only their `split` field changes.

use serde::{Deserialize, Serialize};

use super::manifest::{DatasetError, DatasetManifest, Split};
use crate::rng::SplitMix64;

const RATIO_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self, DatasetError> {
        let ok = [train, val, test].iter().all(|r| r.is_finite() && *r >= 0.0)
            && (train + val + test - 1.0).abs() <= RATIO_TOLERANCE;
        if !ok {
            return Err(DatasetError::Ratios(train, val, test));
        }
        Ok(Self {
            train,
            val,
            test,
            seed,
        })
    }

    /// The 70/10/20 split.
    pub fn standard(seed: u64) -> Self {
        Self {
            train: 0.7,
            val: 0.1,
            test: 0.2,
            seed,
        }
    }
}

/// `(n_train, n_val, n_test)` for `n` entries: floor for train and val,
/// remainder to test. A tiny epsilon keeps products such as `0.7 * 10`
/// from flooring to one below the exact decimal result.
pub fn split_sizes(n: usize, spec: &SplitSpec) -> (usize, usize, usize) {
    let floor = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
    let n_train = floor(spec.train).min(n);
    let n_val = floor(spec.val).min(n - n_train);
    (n_train, n_val, n - n_train - n_val)
}

pub fn split_dataset(
    manifest: &DatasetManifest,
    spec: &SplitSpec,
) -> Result<DatasetManifest, DatasetError> {
    let spec = SplitSpec::new(spec.train, spec.val, spec.test, spec.seed)?;
    if manifest.is_empty() {
        return Err(DatasetError::Empty);
    }
    if manifest.entries.iter().any(|e| e.split.is_some()) {
        return Err(DatasetError::AlreadySplit);
    }
    let n = manifest.len();
    let (n_train, n_val, _) = split_sizes(n, &spec);
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(spec.seed).shuffle(&mut order);

    let mut out = manifest.clone();
    for (rank, &idx) in order.iter().enumerate() {
        out.entries[idx].split = Some(if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        });
    }
    Ok(out)
}
