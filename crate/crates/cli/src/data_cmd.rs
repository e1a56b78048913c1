use std::path::PathBuf;

use clap::Args;
use detkit::dataset::{
    filter_dark, pool, serialize_detections, split_dataset, DatasetManifest, Split, SplitSpec, DEFAULT_DARK_THRESHOLD,
};
use detkit::io::write_atomic;
use detkit::rng::SplitMix64;
use detkit::synthfarm::{generate_dataset_with, generate_scene, image_seed, perturb_predictions, SceneConfig, SceneView, Weather};
use detkit::ImageDims;
use rayon::prelude::*;

use crate::util::{fnv1a, relative_path, require_exists, slash_path, usage, Classify, CliResult};
use crate::{report_written, GlobalOptions};

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Input manifest; repeat to pool several datasets before splitting
    #[arg(long, required = true)]
    pub manifest: Vec<PathBuf>,
    /// Name for a pooled dataset
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, default_value_t = 0.7)]
    pub train: f64,
    #[arg(long, default_value_t = 0.1)]
    pub val: f64,
    #[arg(long, default_value_t = 0.2)]
    pub test: f64,
    /// Drop images whose mean luma is below --dark-threshold first
    #[arg(long)]
    pub filter_dark: bool,
    /// Mean-luma cutoff on a [0, 1] scale
    #[arg(long, default_value_t = DEFAULT_DARK_THRESHOLD)]
    pub dark_threshold: f64,
}

pub fn split(g: &GlobalOptions, a: &SplitArgs) -> CliResult {
    for m in &a.manifest {
        require_exists(m, "manifest")?;
    }
    let spec = SplitSpec::new(a.train, a.val, a.test, g.seed).or_else(|e| usage(e.to_string()))?;
    let loaded = a
        .manifest
        .iter()
        .map(|p| DatasetManifest::load(p))
        .collect::<Result<Vec<_>, _>>()
        .data()?;
    let mut manifest = if loaded.len() == 1 {
        loaded.into_iter().next().expect("one manifest")
    } else {
        let name = a.name.clone().unwrap_or_else(|| "pooled".to_string());
        pool(&name, &loaded).data()?
    };
    if let Some(n) = &a.name {
        manifest.name = n.clone();
    }
    if manifest.entries.iter().any(|e| e.split.is_some()) {
        for e in &mut manifest.entries {
            e.split = None;
        }
        g.log(1, "input had split assignments; re-splitting");
    }
    if a.filter_dark {
        let (kept, removed) = filter_dark(&manifest, a.dark_threshold).data()?;
        for r in &removed {
            g.log(1, format!("dropped dark image {r}"));
        }
        manifest = kept;
    }
    let out = split_dataset(&manifest, &spec).data()?;

    let dir = g.out_dir("splits");
    std::fs::create_dir_all(&dir).internal()?;
    let root = slash_path(&relative_path(&dir, &out.base_dir));
    let mut written = Vec::new();
    let mut write = |name: String, m: &DatasetManifest| -> CliResult {
        let p = dir.join(format!("{name}.toml"));
        write_atomic(&p, m.to_toml_with_root(Some(&root)).as_bytes()).internal()?;
        written.push(p);
        Ok(())
    };
    write(out.name.clone(), &out)?;
    let mut sizes = Vec::new();
    for s in Split::ALL {
        let sub = out.subset(s);
        sizes.push(format!("{} {}", s.as_str(), sub.len()));
        write(sub.name.clone(), &sub)?;
    }
    report_written(g, &written);
    println!("{}: {}", out.name, sizes.join(", "));
    Ok(())
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of scenes
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// clear, choppy, foggy or adverse
    #[arg(long, default_value = "clear")]
    pub weather: Weather,
    /// Dataset name (default: synth-<weather>)
    #[arg(long)]
    pub name: Option<String>,
    /// Image width [default: 640]
    #[arg(long)]
    pub width: Option<u32>,
    /// Image height [default: 480]
    #[arg(long)]
    pub height: Option<u32>,
    /// Buoy rows [default: 3]
    #[arg(long)]
    pub lines: Option<usize>,
    /// Buoys per row [default: 6]
    #[arg(long)]
    pub buoys_per_line: Option<usize>,
    /// Horizon as a fraction of height [default: 0.35]
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Per-depth size decay [default: 0.75]
    #[arg(long)]
    pub decay: Option<f64>,
    /// Nearest buoy radius as a fraction of height [default: 0.05]
    #[arg(long)]
    pub near_radius: Option<f64>,
    /// Fog opacity (overrides the weather preset)
    #[arg(long)]
    pub fog: Option<f64>,
    /// Ripple amplitude in 8-bit units (overrides the weather preset)
    #[arg(long)]
    pub ripple: Option<f64>,
    /// Sensor noise sigma in 8-bit units (overrides the weather preset)
    #[arg(long)]
    pub noise: Option<f64>,
    /// Rain streaks per 10,000 pixels (overrides the weather preset)
    #[arg(long)]
    pub rain: Option<f64>,
}

pub fn synth(g: &GlobalOptions, a: &SynthArgs) -> CliResult {
    if a.n == 0 {
        return usage("--n must be positive");
    }
    let base = g.config()?.synth.unwrap_or_default();
    let mut cfg = base.with_weather(a.weather);
    let dims = ImageDims::new(a.width.unwrap_or(base.dims.width), a.height.unwrap_or(base.dims.height))
        .or_else(|e| usage(e.to_string()))?;
    cfg.dims = dims;
    macro_rules! set {
        ($field:ident, $flag:expr) => {
            if let Some(v) = $flag {
                cfg.$field = v;
            }
        };
    }
    set!(n_lines, a.lines);
    set!(buoys_per_line, a.buoys_per_line);
    set!(horizon_y, a.horizon);
    set!(decay, a.decay);
    set!(near_radius, a.near_radius);
    set!(fog_alpha, a.fog);
    set!(ripple_amplitude, a.ripple);
    set!(noise_sigma, a.noise);
    set!(rain_density, a.rain);
    cfg.validate().or_else(|e| usage(e.to_string()))?;

    let name = a.name.clone().unwrap_or_else(|| format!("synth-{}", weather_name(a.weather)));
    let dir = g.out_dir("synth").join(&name);
    std::fs::create_dir_all(&dir).internal()?;

    // Render in parallel chunks; scenes depend only on (seed, index).
    let chunk = (rayon::current_num_threads() * 4).max(1);
    let mut cache: Vec<Option<_>> = Vec::new();
    let mut cache_start = 0;
    let seed = g.seed;
    let manifest = generate_dataset_with(&cfg, a.n, &name, &dir, |i| {
        if i < cache_start || i >= cache_start + cache.len() {
            cache_start = i;
            let end = (i + chunk).min(a.n);
            cache = (i..end)
                .into_par_iter()
                .map(|k| Some(generate_scene(&SceneConfig { seed: image_seed(seed, k), ..cfg })))
                .collect();
        }
        g.log(2, format!("scene {i}"));
        cache[i - cache_start].take().expect("each scene is rendered once")
    })
    .internal()?;
    let boxes: usize = manifest.entries.iter().map(|e| e.annotations.len()).sum();
    println!("{name}: {} images, {boxes} boxes in {}", manifest.len(), dir.display());
    Ok(())
}

fn weather_name(w: Weather) -> &'static str {
    match w {
        Weather::Clear => "clear",
        Weather::Choppy => "choppy",
        Weather::Foggy => "foggy",
        Weather::Adverse => "adverse",
    }
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    /// Ground-truth manifest with images
    #[arg(long)]
    pub manifest: PathBuf,
    /// Name of the simulated model (output directory name)
    #[arg(long)]
    pub model: String,
    /// Horizon as a fraction of height; spurious boxes go below it
    #[arg(long, default_value_t = 0.35)]
    pub horizon: f64,
    /// Probability of missing an object outright [default: 0.05]
    #[arg(long)]
    pub drop: Option<f64>,
    /// Box jitter sigma as a fraction of box size [default: 0.06]
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Expected spurious detections per image [default: 1.0]
    #[arg(long)]
    pub spurious: Option<f64>,
    /// Ignore image contrast when deciding misses and confidences
    #[arg(long)]
    pub no_contrast: bool,
}

pub fn perturb(g: &GlobalOptions, a: &PerturbArgs) -> CliResult {
    require_exists(&a.manifest, "manifest")?;
    if !(a.horizon > 0.0 && a.horizon < 1.0) {
        return usage("--horizon must be in (0, 1)");
    }
    let mut model = g.config()?.perturb.unwrap_or(detkit::synthfarm::ErrorModel {
        drop_rate: 0.05,
        jitter_sigma: 0.06,
        spurious_rate: 1.0,
        conf: detkit::synthfarm::ConfModel {
            contrast_aware: true,
            ..Default::default()
        },
    });
    if let Some(v) = a.drop {
        model.drop_rate = v;
    }
    if let Some(v) = a.jitter {
        model.jitter_sigma = v;
    }
    if let Some(v) = a.spurious {
        model.spurious_rate = v;
    }
    if a.no_contrast {
        model.conf.contrast_aware = false;
    }
    if !(0.0..=1.0).contains(&model.drop_rate) || model.jitter_sigma < 0.0 || model.spurious_rate < 0.0 {
        return usage("--drop must be in [0, 1]; --jitter and --spurious must be >= 0");
    }

    let manifest = DatasetManifest::load(&a.manifest).data()?;
    let dir = g.out_dir("predictions").join(&a.model).join(&manifest.name);
    std::fs::create_dir_all(&dir).internal()?;
    let results: Vec<CliResult<(PathBuf, usize)>> = manifest
        .entries
        .par_iter()
        .map(|e| {
            let id = e.image_id();
            let img = image::open(manifest.resolve(&e.image)).data()?.to_rgb8();
            let view = SceneView {
                image: &img,
                annotations: &e.annotations,
                horizon_y: a.horizon,
            };
            let seed = SplitMix64::derive(g.seed, &[fnv1a(&id)]).next();
            let p = perturb_predictions(view, &model, seed);
            let path = dir.join(format!("{id}.txt"));
            write_atomic(&path, serialize_detections(&p.detections).as_bytes()).internal()?;
            Ok((path, p.detections.len()))
        })
        .collect();
    let mut total = 0;
    for r in results {
        let (path, n) = r?;
        g.log(2, format!("wrote {}", path.display()));
        total += n;
    }
    println!("{}/{}: {total} detections for {} images", a.model, manifest.name, manifest.len());
    Ok(())
}
