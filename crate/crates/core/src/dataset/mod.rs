//! Annotation I/O, dataset manifests and the deterministic split.

mod labels;
mod manifest;
mod split;

pub use labels::{
    parse_detections, parse_labels, serialize_detections, serialize_labels, Annotation,
    Detection, ParseError, ParseErrorKind,
};
pub use manifest::{
    filter_dark, image_id_of, mean_luma, pool, pool_keep_splits, DatasetError, DatasetManifest,
    ManifestEntry, Source, Split, DEFAULT_DARK_THRESHOLD,
};
pub use split::{split_dataset, split_sizes, SplitSpec};
