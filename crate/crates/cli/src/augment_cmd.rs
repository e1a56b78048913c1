use std::path::PathBuf;

use clap::Args;
use detkit::augment::{AugmentConfig, LabelTrace, OpRecord, Pipeline, Sample, SampleSource};
use detkit::dataset::{serialize_labels, DatasetManifest, ManifestEntry};
use detkit::io::{write_atomic, write_png_atomic};
use detkit::ImageDims;
use rayon::prelude::*;
use serde::Serialize;

use crate::util::{require_exists, usage, CliError, Classify, CliResult};
use crate::GlobalOptions;

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Source manifest
    #[arg(long)]
    pub manifest: PathBuf,
    /// Number of augmented samples to write
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    /// Output dataset name (default: <manifest name>-aug)
    #[arg(long)]
    pub name: Option<String>,
    /// Output size as WxH (default: each primary sample's own size)
    #[arg(long, value_parser = parse_dims)]
    pub img_size: Option<ImageDims>,
    /// Hue gain [default: 0.015]
    #[arg(long)]
    pub hsv_h: Option<f64>,
    /// Saturation gain [default: 0.7]
    #[arg(long)]
    pub hsv_s: Option<f64>,
    /// Value gain [default: 0.4]
    #[arg(long)]
    pub hsv_v: Option<f64>,
    /// Max rotation in degrees [default: 0]
    #[arg(long)]
    pub degrees: Option<f64>,
    /// Max translation as a fraction of size [default: 0.1]
    #[arg(long)]
    pub translate: Option<f64>,
    /// Scale gain, scale drawn from [1-g, 1+g] [default: 0.5]
    #[arg(long)]
    pub scale: Option<f64>,
    /// Max shear in degrees [default: 0]
    #[arg(long)]
    pub shear: Option<f64>,
    /// Perspective coefficient [default: 0]
    #[arg(long)]
    pub perspective: Option<f64>,
    /// Up-down flip probability [default: 0]
    #[arg(long)]
    pub flipud: Option<f64>,
    /// Left-right flip probability [default: 0.5]
    #[arg(long)]
    pub fliplr: Option<f64>,
    /// Mosaic probability [default: 1.0]
    #[arg(long)]
    pub mosaic: Option<f64>,
    /// Mixup probability [default: 0.05]
    #[arg(long)]
    pub mixup: Option<f64>,
}

fn parse_dims(s: &str) -> Result<ImageDims, String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH, e.g. 640x480")?;
    let w: u32 = w.trim().parse().map_err(|_| format!("bad width {w:?}"))?;
    let h: u32 = h.trim().parse().map_err(|_| format!("bad height {h:?}"))?;
    ImageDims::new(w, h).map_err(|e| e.to_string())
}

/// Loads images on demand; headers are checked up front.
struct ManifestSource<'a> {
    manifest: &'a DatasetManifest,
}

impl SampleSource for ManifestSource<'_> {
    fn len(&self) -> usize {
        self.manifest.len()
    }

    fn get(&self, index: usize) -> Sample {
        let e = &self.manifest.entries[index];
        let image = image::open(self.manifest.resolve(&e.image))
            .unwrap_or_else(|err| panic!("{}: {err}", e.image))
            .to_rgb8();
        Sample {
            image,
            annotations: e.annotations.clone(),
        }
    }
}

#[derive(Serialize)]
struct Provenance<'a> {
    seed: u64,
    index: usize,
    config: &'a AugmentConfig,
    ops: &'a [OpRecord],
    /// Source image path for each output label, parallel to the label file.
    label_sources: Vec<LabelSource<'a>>,
}

#[derive(Serialize)]
struct LabelSource<'a> {
    image: &'a str,
    annotation: usize,
    trace: &'a LabelTrace,
}

pub fn augment(g: &GlobalOptions, a: &AugmentArgs) -> CliResult {
    require_exists(&a.manifest, "manifest")?;
    if a.count == 0 {
        return usage("--count must be positive");
    }
    let mut cfg = g.config()?.augment.unwrap_or_default();
    macro_rules! set {
        ($field:ident, $flag:expr) => {
            if let Some(v) = $flag {
                cfg.$field = v;
            }
        };
    }
    set!(hsv_h, a.hsv_h);
    set!(hsv_s, a.hsv_s);
    set!(hsv_v, a.hsv_v);
    set!(degrees, a.degrees);
    set!(translate, a.translate);
    set!(scale, a.scale);
    set!(shear, a.shear);
    set!(perspective, a.perspective);
    set!(flip_ud_prob, a.flipud);
    set!(flip_lr_prob, a.fliplr);
    set!(mosaic_prob, a.mosaic);
    set!(mixup_prob, a.mixup);
    if a.img_size.is_some() {
        cfg.img_size = a.img_size;
    }
    cfg.rng_seed = g.seed;
    cfg.validate().or_else(|e| usage(e.to_string()))?;

    let manifest = DatasetManifest::load(&a.manifest).data()?;
    for e in &manifest.entries {
        let p = manifest.resolve(&e.image);
        let (w, h) = image::image_dimensions(&p).map_err(|err| CliError::Data(anyhow::anyhow!("{}: {err}", p.display())))?;
        if (w, h) != (e.dims.width, e.dims.height) {
            return Err(CliError::Data(anyhow::anyhow!(
                "{}: manifest says {}x{}, file is {w}x{h}",
                e.image,
                e.dims.width,
                e.dims.height
            )));
        }
    }
    let source = ManifestSource { manifest: &manifest };
    let pipeline = Pipeline::new(&source, cfg).or_else(|e| usage(e.to_string()))?;

    let name = a.name.clone().unwrap_or_else(|| format!("{}-aug", manifest.name));
    let dir = g.out_dir("augment").join(&name);
    std::fs::create_dir_all(&dir).internal()?;
    let entries: Vec<CliResult<ManifestEntry>> = (0..a.count)
        .into_par_iter()
        .map(|i| {
            let out = pipeline.sample(i);
            let image = format!("images/{i:06}.png");
            let labels = format!("labels/{i:06}.txt");
            write_png_atomic(&dir.join(&image), &out.sample.image).internal()?;
            write_atomic(&dir.join(&labels), serialize_labels(&out.sample.annotations).as_bytes()).internal()?;
            let prov = Provenance {
                seed: g.seed,
                index: i,
                config: pipeline.config(),
                ops: &out.ops,
                label_sources: out
                    .traces
                    .iter()
                    .map(|t| LabelSource {
                        image: &manifest.entries[t.source].image,
                        annotation: t.annotation,
                        trace: t,
                    })
                    .collect(),
            };
            let json = serde_json::to_string_pretty(&prov).internal()?;
            write_atomic(&dir.join(format!("provenance/{i:06}.json")), json.as_bytes()).internal()?;
            Ok(ManifestEntry {
                image,
                dims: out.sample.dims(),
                labels,
                source: manifest.entries[i % manifest.len()].source,
                split: None,
                annotations: out.sample.annotations,
            })
        })
        .collect();
    let mut out = DatasetManifest::new(&name, manifest.source, manifest.class_names.clone());
    out.base_dir = dir.clone();
    for e in entries {
        out.entries.push(e?);
    }
    out.save(&dir.join("manifest.toml")).internal()?;
    println!("{name}: {} augmented samples in {}", out.len(), dir.display());
    Ok(())
}
