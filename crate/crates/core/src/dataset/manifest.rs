//! Dataset manifests: a named image set with per-entry dims, annotations,
//! provenance and split.
//!
//! On disk a manifest is a TOML file. Image and label paths are relative to
//! the manifest's directory (or to `root` when present):
//!
//! ```toml
//! name = "buoy-low-res"
//! source = "buoy_low_res"
//! classes = ["buoy"]
//!
//! [[entries]]
//! image = "images/000000.png"
//! width = 1920
//! height = 1080
//! labels = "labels/000000.txt"
//! source = "buoy_low_res"
//! split = "train"
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::labels::{parse_labels, serialize_labels, Annotation, ParseError};
use crate::geometry::{GeometryError, ImageDims};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Boat,
    BuoyLowRes,
    BuoyHighRes,
    Adverse,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train, val or test)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Labels {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("duplicate image path {0:?}")]
    DuplicatePath(String),
    #[error("{image}: class id {class_id} not in the declared class set of {num_classes}")]
    UnknownClass {
        image: String,
        class_id: u32,
        num_classes: usize,
    },
    #[error("{image}: {source}")]
    Dims {
        image: String,
        #[source]
        source: GeometryError,
    },
    #[error("manifest is empty")]
    Empty,
    #[error("split ratios must be non-negative and sum to 1, got ({0}, {1}, {2})")]
    Ratios(f64, f64, f64),
    #[error("manifest already has split assignments")]
    AlreadySplit,
    #[error("incompatible class sets: {0:?} vs {1:?}")]
    IncompatibleClasses(Vec<String>, Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// Image path relative to the manifest base directory, `/`-separated.
    pub image: String,
    pub dims: ImageDims,
    /// Label path relative to the manifest base directory.
    pub labels: String,
    pub source: Source,
    pub split: Option<Split>,
    pub annotations: Vec<Annotation>,
}

impl ManifestEntry {
    /// Image identifier used to pair detection files with entries: the file stem.
    pub fn image_id(&self) -> String {
        image_id_of(&self.image)
    }
}

pub fn image_id_of(path: &str) -> String {
    Path::new(path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    /// Set when every entry shares one source.
    pub source: Option<Source>,
    pub class_names: Vec<String>,
    pub entries: Vec<ManifestEntry>,
    /// Directory image and label paths resolve against.
    pub base_dir: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<Source>,
    classes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    root: Option<String>,
    #[serde(default)]
    entries: Vec<EntryFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EntryFile {
    image: String,
    width: u32,
    height: u32,
    labels: String,
    source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, source: Option<Source>, class_names: Vec<String>) -> Self {
        Self {
            name: name.into(),
            source,
            class_names,
            entries: Vec::new(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.base_dir.join(relative)
    }

    /// Checks path uniqueness and that class ids are declared.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.image.as_str()) {
                return Err(DatasetError::DuplicatePath(e.image.clone()));
            }
            if let Some(a) = e
                .annotations
                .iter()
                .find(|a| a.class_id as usize >= self.class_names.len())
            {
                return Err(DatasetError::UnknownClass {
                    image: e.image.clone(),
                    class_id: a.class_id,
                    num_classes: self.class_names.len(),
                });
            }
        }
        Ok(())
    }

    /// Entries assigned to `split`, as a new manifest.
    pub fn subset(&self, split: Split) -> DatasetManifest {
        DatasetManifest {
            name: format!("{}-{}", self.name, split.as_str()),
            entries: self
                .entries
                .iter()
                .filter(|e| e.split == Some(split))
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        self.to_toml_with_root(None)
    }

    /// Serializes with an explicit `root`, for manifests written away from
    /// their data.
    pub fn to_toml_with_root(&self, root: Option<&str>) -> String {
        let file = ManifestFile {
            name: self.name.clone(),
            source: self.source,
            classes: self.class_names.clone(),
            root: root.map(str::to_string),
            entries: self
                .entries
                .iter()
                .map(|e| EntryFile {
                    image: e.image.clone(),
                    width: e.dims.width,
                    height: e.dims.height,
                    labels: e.labels.clone(),
                    source: e.source,
                    split: e.split,
                })
                .collect(),
        };
        toml::to_string(&file).expect("manifest serialization is infallible")
    }

    /// Loads a manifest and all label files it references.
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: ManifestFile = toml::from_str(&text).map_err(|e| DatasetError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let dir = path.parent().unwrap_or(Path::new("")).to_path_buf();
        let base_dir = match &file.root {
            Some(r) => dir.join(r),
            None => dir,
        };
        let mut entries = Vec::with_capacity(file.entries.len());
        for e in file.entries {
            let dims = ImageDims::new(e.width, e.height).map_err(|source| DatasetError::Dims {
                image: e.image.clone(),
                source,
            })?;
            let label_path = base_dir.join(&e.labels);
            let annotations = match std::fs::read_to_string(&label_path) {
                Ok(t) => parse_labels(&t).map_err(|source| DatasetError::Labels {
                    path: label_path.clone(),
                    source,
                })?,
                Err(source) => {
                    return Err(DatasetError::Io {
                        path: label_path,
                        source,
                    })
                }
            };
            entries.push(ManifestEntry {
                image: e.image,
                dims,
                labels: e.labels,
                source: e.source,
                split: e.split,
                annotations,
            });
        }
        let m = DatasetManifest {
            name: file.name,
            source: file.source,
            class_names: file.classes,
            entries,
            base_dir,
        };
        m.validate()?;
        Ok(m)
    }

    /// Writes the manifest file only.
    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        crate::io::write_atomic(path, self.to_toml().as_bytes()).map_err(|source| {
            DatasetError::Io {
                path: path.to_path_buf(),
                source,
            }
        })
    }

    /// Writes every entry's label file under the base directory.
    pub fn write_labels(&self) -> Result<(), DatasetError> {
        for e in &self.entries {
            let p = self.resolve(&e.labels);
            crate::io::write_atomic(&p, serialize_labels(&e.annotations).as_bytes())
                .map_err(|source| DatasetError::Io { path: p, source })?;
        }
        Ok(())
    }
}

/// Concatenates manifests into one pool. Per-entry sources are kept; split
/// assignments are cleared so the pool can be re-split as a whole.
pub fn pool(name: &str, manifests: &[DatasetManifest]) -> Result<DatasetManifest, DatasetError> {
    let mut pooled = pool_keep_splits(name, manifests)?;
    for e in &mut pooled.entries {
        e.split = None;
    }
    Ok(pooled)
}

/// Like [`pool`] but keeps each entry's existing split, so the combined
/// train set is the union of the per-source train sets.
pub fn pool_keep_splits(
    name: &str,
    manifests: &[DatasetManifest],
) -> Result<DatasetManifest, DatasetError> {
    let first = manifests.first().ok_or(DatasetError::Empty)?;
    let mut out = DatasetManifest {
        name: name.to_string(),
        source: first.source,
        class_names: first.class_names.clone(),
        entries: Vec::new(),
        base_dir: first.base_dir.clone(),
    };
    let mut seen = HashSet::new();
    for m in manifests {
        if m.class_names != out.class_names {
            return Err(DatasetError::IncompatibleClasses(
                out.class_names.clone(),
                m.class_names.clone(),
            ));
        }
        if m.source != out.source {
            out.source = None;
        }
        let rebase = m.base_dir != out.base_dir;
        for e in &m.entries {
            let mut e = e.clone();
            if rebase {
                e.image = m.base_dir.join(&e.image).to_string_lossy().into_owned();
                e.labels = m.base_dir.join(&e.labels).to_string_lossy().into_owned();
            }
            if !seen.insert(e.image.clone()) {
                return Err(DatasetError::DuplicatePath(e.image));
            }
            out.entries.push(e);
        }
    }
    Ok(out)
}

/// Rec. 601 mean luma of an RGB image on a `[0, 1]` scale.
pub fn mean_luma(image: &image::RgbImage) -> f64 {
    let n = (image.width() as u64 * image.height() as u64).max(1);
    let sum: f64 = image
        .pixels()
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .sum();
    sum / n as f64 / 255.0
}

/// Default mean-luma cutoff below which an image counts as too dark.
pub const DEFAULT_DARK_THRESHOLD: f64 = 0.05;

/// Drops entries whose image mean luma is below `threshold`. Returns the
/// filtered manifest and the removed image paths.
pub fn filter_dark(
    manifest: &DatasetManifest,
    threshold: f64,
) -> Result<(DatasetManifest, Vec<String>), DatasetError> {
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for e in &manifest.entries {
        let p = manifest.resolve(&e.image);
        let img = image::open(&p)
            .map_err(|err| DatasetError::Format {
                path: p.clone(),
                message: err.to_string(),
            })?
            .to_rgb8();
        if mean_luma(&img) < threshold {
            removed.push(e.image.clone());
        } else {
            kept.push(e.clone());
        }
    }
    Ok((
        DatasetManifest {
            entries: kept,
            ..manifest.clone()
        },
        removed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBoxNorm;

    pub(crate) fn manifest(name: &str, n: usize, source: Source) -> DatasetManifest {
        let mut m = DatasetManifest::new(name, Some(source), vec!["buoy".into()]);
        for i in 0..n {
            m.entries.push(ManifestEntry {
                image: format!("{name}/images/{i:05}.png"),
                dims: ImageDims::new(64, 48).unwrap(),
                labels: format!("{name}/labels/{i:05}.txt"),
                source,
                split: None,
                annotations: vec![Annotation::new(
                    0,
                    BBoxNorm::new(0.5, 0.5, 0.1, 0.1).unwrap(),
                )],
            });
        }
        m
    }

    #[test]
    fn toml_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest("a", 3, Source::BuoyLowRes);
        m.base_dir = dir.path().to_path_buf();
        m.entries[1].split = Some(Split::Val);
        m.entries[2].annotations.clear();
        m.write_labels().unwrap();
        let path = dir.path().join("a.toml");
        m.save(&path).unwrap();
        let back = DatasetManifest::load(&path).unwrap();
        assert_eq!(back, m);
        assert!(m.to_toml().contains("source = \"buoy_low_res\""));
    }

    #[test]
    fn pool_concatenates_and_clears_split() {
        let mut a = manifest("boat", 700, Source::Boat);
        a.entries[0].split = Some(Split::Train);
        let b = manifest("lo", 160, Source::BuoyLowRes);
        let c = manifest("hi", 181, Source::BuoyHighRes);
        let p = pool("all", &[a.clone(), b, c]).unwrap();
        assert_eq!(p.len(), 1041);
        assert_eq!(p.source, None);
        assert!(p.entries.iter().all(|e| e.split.is_none()));
        assert_eq!(p.entries[700].source, Source::BuoyLowRes);

        let kept = pool_keep_splits("all", &[a]).unwrap();
        assert_eq!(kept.entries[0].split, Some(Split::Train));
    }

    #[test]
    fn pool_of_one_is_identity() {
        let a = manifest("a", 5, Source::Boat);
        let p = pool("a", std::slice::from_ref(&a)).unwrap();
        assert_eq!(p.entries, a.entries);
        assert_eq!(p.source, Some(Source::Boat));
    }

    #[test]
    fn pool_rejects_duplicates_and_class_mismatch() {
        let a = manifest("a", 2, Source::Boat);
        assert!(matches!(
            pool("x", &[a.clone(), a.clone()]),
            Err(DatasetError::DuplicatePath(_))
        ));
        let mut b = manifest("b", 2, Source::Boat);
        b.class_names = vec!["buoy".into(), "boat".into()];
        assert!(matches!(
            pool("x", &[a, b]),
            Err(DatasetError::IncompatibleClasses(..))
        ));
        assert!(matches!(pool("x", &[]), Err(DatasetError::Empty)));
    }

    #[test]
    fn validate_catches_unknown_class() {
        let mut m = manifest("a", 1, Source::Boat);
        m.entries[0].annotations[0].class_id = 3;
        assert!(matches!(m.validate(), Err(DatasetError::UnknownClass { .. })));
    }

    #[test]
    fn dark_filter() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest("d", 2, Source::BuoyLowRes);
        m.base_dir = dir.path().to_path_buf();
        let dark = image::RgbImage::from_pixel(8, 8, image::Rgb([5, 5, 5]));
        let bright = image::RgbImage::from_pixel(8, 8, image::Rgb([120, 130, 140]));
        crate::io::write_png_atomic(&m.resolve(&m.entries[0].image), &dark).unwrap();
        crate::io::write_png_atomic(&m.resolve(&m.entries[1].image), &bright).unwrap();
        assert!(mean_luma(&dark) < DEFAULT_DARK_THRESHOLD);
        let (kept, removed) = filter_dark(&m, DEFAULT_DARK_THRESHOLD).unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(removed, vec![m.entries[0].image.clone()]);
    }

    #[test]
    fn image_id_is_stem() {
        assert_eq!(image_id_of("images/000123.png"), "000123");
        assert_eq!(image_id_of("x"), "x");
    }
}
