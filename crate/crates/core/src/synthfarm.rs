//! Procedural mussel-farm scenes with exact ground truth.
//!
//! A scene is a sky/sea gradient split at a horizon, with rows of buoys
//! converging on a vanishing point. Buoy `j` on a row sits at
//! `vp + (near - vp) * decay^j` with radius `r0 * decay^j`, so perspective
//! is a single geometric sequence. Buoys are painted far to near as shaded
//! ellipses. Ground truth is captured before weather compositing (fog,
//! ripple, rain, noise), so weather never moves geometry.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Annotation, DatasetError, DatasetManifest, Detection, ManifestEntry, Source};
use crate::geometry::{BBoxAbs, BBoxNorm, ImageDims};
use crate::rng::SplitMix64;

/// Minimum visible fraction for a buoy to be annotated.
pub const MIN_VISIBILITY: f64 = 0.25;

/// Vertical/horizontal radius ratio of a buoy ellipse.
pub const BUOY_ASPECT: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weather {
    Clear,
    Choppy,
    Foggy,
    Adverse,
}

impl Weather {
    /// In order of increasing degradation.
    pub const ALL: [Weather; 4] = [
        Weather::Clear,
        Weather::Choppy,
        Weather::Foggy,
        Weather::Adverse,
    ];
}

impl std::str::FromStr for Weather {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clear" => Ok(Weather::Clear),
            "choppy" => Ok(Weather::Choppy),
            "foggy" => Ok(Weather::Foggy),
            "adverse" => Ok(Weather::Adverse),
            other => Err(format!(
                "unknown weather {other:?} (expected clear, choppy, foggy or adverse)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub dims: ImageDims,
    pub n_lines: usize,
    pub buoys_per_line: usize,
    /// Horizon row as a fraction of image height, in (0, 1).
    pub horizon_y: f64,
    /// Per-depth radius shrink factor, in (0, 1].
    pub decay: f64,
    /// Radius of the nearest buoy as a fraction of image height.
    pub near_radius: f64,
    pub weather: Weather,
    pub fog_alpha: f64,
    /// Ripple amplitude in 8-bit luminance units.
    pub ripple_amplitude: f64,
    /// Gaussian noise standard deviation in 8-bit units.
    pub noise_sigma: f64,
    /// Rain streaks per 10,000 pixels.
    pub rain_density: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            dims: ImageDims {
                width: 640,
                height: 480,
            },
            n_lines: 3,
            buoys_per_line: 6,
            horizon_y: 0.35,
            decay: 0.75,
            near_radius: 0.05,
            weather: Weather::Clear,
            fog_alpha: 0.0,
            ripple_amplitude: 0.0,
            noise_sigma: 0.0,
            rain_density: 0.0,
            seed: 0,
        }
    }
}

impl SceneConfig {
    /// Sets `weather` and the compositing strengths that go with it.
    pub fn with_weather(mut self, weather: Weather) -> Self {
        let (fog, ripple, noise, rain) = match weather {
            Weather::Clear => (0.0, 0.0, 0.0, 0.0),
            Weather::Choppy => (0.0, 14.0, 0.0, 0.0),
            Weather::Foggy => (0.45, 0.0, 0.0, 0.0),
            Weather::Adverse => (0.45, 14.0, 10.0, 6.0),
        };
        self.weather = weather;
        self.fog_alpha = fog;
        self.ripple_amplitude = ripple;
        self.noise_sigma = noise;
        self.rain_density = rain;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Config(m.to_string()));
        if !(self.horizon_y > 0.0 && self.horizon_y < 1.0) {
            return bad("horizon_y must be in (0, 1)");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must be in (0, 1]");
        }
        if !(self.near_radius > 0.0 && self.near_radius < 1.0) {
            return bad("near_radius must be in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.fog_alpha) {
            return bad("fog_alpha must be in [0, 1]");
        }
        if self.noise_sigma < 0.0 || self.rain_density < 0.0 || self.ripple_amplitude < 0.0 {
            return bad("noise, rain and ripple strengths must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene config: {0}")]
    Config(String),
    #[error("dataset must contain at least one image")]
    Empty,
    #[error("output already exists: {0}")]
    Collision(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuoyTruth {
    pub cx: f64,
    pub cy: f64,
    pub radius_x: f64,
    pub radius_y: f64,
    pub line: usize,
    pub depth: usize,
    /// Some of the ellipse is hidden behind a nearer buoy.
    pub occluded: bool,
    /// Fraction of the ellipse's pixels visible in the final frame.
    pub visibility: f64,
    /// Index into `SceneTruth::annotations` when annotated.
    pub annotation: Option<usize>,
}

impl BuoyTruth {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let dx = (x - self.cx) / self.radius_x;
        let dy = (y - self.cy) / self.radius_y;
        dx * dx + dy * dy <= 1.0
    }

    /// Unclipped analytic bounds of the ellipse.
    pub fn bounds(&self) -> BBoxAbs {
        BBoxAbs {
            x1: self.cx - self.radius_x,
            y1: self.cy - self.radius_y,
            x2: self.cx + self.radius_x,
            y2: self.cy + self.radius_y,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneTruth {
    pub config: SceneConfig,
    /// Final image after weather compositing.
    pub image: RgbImage,
    /// Image before weather compositing.
    pub clean: RgbImage,
    pub annotations: Vec<Annotation>,
    pub buoys: Vec<BuoyTruth>,
    /// Per-pixel index of the buoy painted there (row-major), `None` for water/sky.
    pub owner: Vec<Option<u32>>,
}

impl SceneTruth {
    pub fn dims(&self) -> ImageDims {
        self.config.dims
    }

    pub fn view(&self) -> SceneView<'_> {
        SceneView {
            image: &self.image,
            annotations: &self.annotations,
            horizon_y: self.config.horizon_y,
        }
    }
}

const SKY_TOP: [f64; 3] = [150.0, 185.0, 220.0];
const SKY_HORIZON: [f64; 3] = [200.0, 215.0, 228.0];
const SEA_HORIZON: [f64; 3] = [70.0, 100.0, 112.0];
const SEA_BOTTOM: [f64; 3] = [22.0, 52.0, 66.0];
const FOG: [f64; 3] = [235.0, 238.0, 240.0];
const BUOY_COLORS: [[f64; 3]; 3] = [[235.0, 110.0, 30.0], [240.0, 200.0, 40.0], [230.0, 230.0, 225.0]];

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

fn to_rgb(c: [f64; 3]) -> Rgb<u8> {
    Rgb(c.map(|v| v.round().clamp(0.0, 255.0) as u8))
}

pub fn generate_scene(cfg: &SceneConfig) -> Result<SceneTruth, SynthError> {
    cfg.validate()?;
    let (w, h) = (cfg.dims.w(), cfg.dims.h());
    let (wu, hu) = (cfg.dims.width, cfg.dims.height);
    let horizon = cfg.horizon_y * h;
    let mut rng = SplitMix64::derive(cfg.seed, &[0x5CE4E]);

    let mut img = RgbImage::from_fn(wu, hu, |_, y| {
        let yc = y as f64 + 0.5;
        if yc < horizon {
            to_rgb(lerp3(SKY_TOP, SKY_HORIZON, yc / horizon))
        } else {
            to_rgb(lerp3(SEA_HORIZON, SEA_BOTTOM, (yc - horizon) / (h - horizon)))
        }
    });

    // Layout: every row converges on one vanishing point.
    let vp = (w * (0.5 + rng.uniform(-0.15, 0.15)), horizon);
    let r0 = cfg.near_radius * h;
    let mut buoys = Vec::new();
    for line in 0..cfg.n_lines {
        let spread = (line as f64 + 0.5) / cfg.n_lines as f64;
        let near = (
            w * (-0.1 + 1.2 * spread) + rng.uniform(-0.05, 0.05) * w,
            h * rng.uniform(0.84, 0.95),
        );
        let color = BUOY_COLORS[line % BUOY_COLORS.len()];
        for depth in 0..cfg.buoys_per_line {
            let t = cfg.decay.powi(depth as i32);
            let r = r0 * t;
            let jx = rng.uniform(-0.15, 0.15) * r;
            let jy = rng.uniform(-0.15, 0.15) * r;
            buoys.push((
                BuoyTruth {
                    cx: vp.0 + (near.0 - vp.0) * t + jx,
                    cy: vp.1 + (near.1 - vp.1) * t + jy,
                    radius_x: r,
                    radius_y: r * BUOY_ASPECT,
                    line,
                    depth,
                    occluded: false,
                    visibility: 0.0,
                    annotation: None,
                },
                color,
            ));
        }
    }

    // Painter's order: far (small) first; ties by layout order.
    let mut order: Vec<usize> = (0..buoys.len()).collect();
    order.sort_by(|&a, &b| buoys[a].0.radius_x.total_cmp(&buoys[b].0.radius_x));

    let npix = (wu as usize) * (hu as usize);
    let mut owner: Vec<Option<u32>> = vec![None; npix];
    let mut full_count = vec![0usize; buoys.len()];
    for &i in &order {
        let (b, color) = buoys[i];
        let (gx0, gy0) = ((b.cx - b.radius_x).floor() as i64, (b.cy - b.radius_y).floor() as i64);
        let (gx1, gy1) = ((b.cx + b.radius_x).ceil() as i64, (b.cy + b.radius_y).ceil() as i64);
        let (hx, hy) = (b.cx - 0.35 * b.radius_x, b.cy - 0.35 * b.radius_y);
        for py in gy0..=gy1 {
            for px in gx0..=gx1 {
                let (x, y) = (px as f64 + 0.5, py as f64 + 0.5);
                if !b.contains(x, y) {
                    continue;
                }
                full_count[i] += 1;
                if px < 0 || py < 0 || px >= wu as i64 || py >= hu as i64 {
                    continue;
                }
                let d = (((x - hx) / b.radius_x).powi(2) + ((y - hy) / b.radius_y).powi(2)).sqrt();
                let shade = (1.05 - 0.45 * d).clamp(0.45, 1.0);
                img.put_pixel(px as u32, py as u32, to_rgb(color.map(|c| c * shade)));
                owner[py as usize * wu as usize + px as usize] = Some(i as u32);
            }
        }
    }

    let mut visible = vec![0usize; buoys.len()];
    for o in owner.iter().flatten() {
        visible[*o as usize] += 1;
    }

    let canvas = cfg.dims.full_box();
    let mut annotations = Vec::new();
    let mut truth = Vec::with_capacity(buoys.len());
    for (i, (mut b, _)) in buoys.into_iter().enumerate() {
        b.visibility = if full_count[i] == 0 {
            0.0
        } else {
            visible[i] as f64 / full_count[i] as f64
        };
        b.occluded = owner_overlap(&b, &owner, cfg.dims, i);
        if b.visibility >= MIN_VISIBILITY {
            if let Some(bn) = b.bounds().clip(&canvas).and_then(|c| c.to_norm(cfg.dims).ok()) {
                b.annotation = Some(annotations.len());
                annotations.push(Annotation::new(0, bn));
            }
        }
        truth.push(b);
    }

    let clean = img.clone();
    composite_weather(&mut img, cfg, &mut SplitMix64::derive(cfg.seed, &[0xFEA7]));
    Ok(SceneTruth {
        config: *cfg,
        image: img,
        clean,
        annotations,
        buoys: truth,
        owner,
    })
}

/// True when some in-frame pixel of the ellipse belongs to another buoy.
fn owner_overlap(b: &BuoyTruth, owner: &[Option<u32>], dims: ImageDims, me: usize) -> bool {
    let Some(region) = b.bounds().clip(&dims.full_box()) else {
        return false;
    };
    let (x0, y0) = (region.x1.floor() as u32, region.y1.floor() as u32);
    let (x1, y1) = (
        (region.x2.ceil() as u32).min(dims.width),
        (region.y2.ceil() as u32).min(dims.height),
    );
    for py in y0..y1 {
        for px in x0..x1 {
            if b.contains(px as f64 + 0.5, py as f64 + 0.5) {
                match owner[py as usize * dims.width as usize + px as usize] {
                    Some(o) if o as usize != me => return true,
                    _ => {}
                }
            }
        }
    }
    false
}

fn composite_weather(img: &mut RgbImage, cfg: &SceneConfig, rng: &mut SplitMix64) {
    let (w, h) = (cfg.dims.w(), cfg.dims.h());
    let horizon = cfg.horizon_y * h;

    if cfg.ripple_amplitude > 0.0 {
        // Three mid-frequency components with random phase and orientation.
        let waves: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| {
                let freq = rng.uniform(18.0, 40.0);
                let angle = rng.uniform(-0.4, 0.4);
                let phase = rng.uniform(0.0, std::f64::consts::TAU);
                (freq * angle.sin(), freq * angle.cos(), phase)
            })
            .collect();
        for (x, y, p) in img.enumerate_pixels_mut() {
            let yc = y as f64 + 0.5;
            if yc < horizon {
                continue;
            }
            let (u, v) = ((x as f64 + 0.5) / w, yc / h);
            let depth = (yc - horizon) / (h - horizon);
            let s: f64 = waves
                .iter()
                .map(|&(fx, fy, ph)| (std::f64::consts::TAU * (fx * u + fy * v / depth.max(0.05).sqrt()) + ph).sin())
                .sum::<f64>()
                / 3.0;
            let delta = cfg.ripple_amplitude * (0.3 + 0.7 * depth) * s;
            for c in p.0.iter_mut() {
                *c = (*c as f64 + delta).round().clamp(0.0, 255.0) as u8;
            }
        }
    }

    if cfg.fog_alpha > 0.0 {
        for (_, y, p) in img.enumerate_pixels_mut() {
            let a = cfg.fog_alpha * (1.0 - 0.4 * (y as f64 + 0.5) / h);
            let mixed = lerp3(p.0.map(f64::from), FOG, a);
            *p = to_rgb(mixed);
        }
    }

    if cfg.rain_density > 0.0 {
        let n = (cfg.rain_density * w * h / 10_000.0).round() as usize;
        for _ in 0..n {
            let (x0, y0) = (rng.uniform(0.0, w), rng.uniform(0.0, h));
            let len = rng.uniform(8.0, 24.0);
            let angle = rng.uniform(1.35, 1.75);
            let (dx, dy) = (angle.cos(), angle.sin());
            for s in 0..len as usize {
                let (x, y) = (x0 + dx * s as f64, y0 + dy * s as f64);
                if x < 0.0 || y < 0.0 || x >= w || y >= h {
                    break;
                }
                let p = img.get_pixel_mut(x as u32, y as u32);
                *p = to_rgb(lerp3(p.0.map(f64::from), [245.0, 245.0, 250.0], 0.35));
            }
        }
    }

    if cfg.noise_sigma > 0.0 {
        for p in img.pixels_mut() {
            for c in p.0.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *c = (*c as f64 + cfg.noise_sigma * z).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
}

/// Per-image seed for image `index` of a dataset drawn with `seed`.
pub fn image_seed(seed: u64, index: usize) -> u64 {
    SplitMix64::derive(seed, &[index as u64]).next()
}

/// Generates `n` scenes from a template, each with its own derived seed.
pub fn generate_scenes(
    template: &SceneConfig,
    n: usize,
    seed: u64,
) -> Result<Vec<SceneTruth>, SynthError> {
    if n == 0 {
        return Err(SynthError::Empty);
    }
    (0..n)
        .map(|i| {
            generate_scene(&SceneConfig {
                seed: image_seed(seed, i),
                ..*template
            })
        })
        .collect()
}

/// Renders `n` scenes to `out_dir` as `images/NNNNNN.png` plus
/// `labels/NNNNNN.txt`, and writes `manifest.toml`. Refuses to overwrite an
/// existing dataset.
pub fn generate_dataset(
    template: &SceneConfig,
    n: usize,
    seed: u64,
    name: &str,
    out_dir: &Path,
) -> Result<DatasetManifest, SynthError> {
    generate_dataset_with(template, n, name, out_dir, |i| {
        generate_scene(&SceneConfig {
            seed: image_seed(seed, i),
            ..*template
        })
    })
}

/// As [`generate_dataset`], with scene rendering supplied by the caller
/// (used to render in parallel).
pub fn generate_dataset_with(
    template: &SceneConfig,
    n: usize,
    name: &str,
    out_dir: &Path,
    mut render: impl FnMut(usize) -> Result<SceneTruth, SynthError>,
) -> Result<DatasetManifest, SynthError> {
    template.validate()?;
    if n == 0 {
        return Err(SynthError::Empty);
    }
    let manifest_path = out_dir.join("manifest.toml");
    if manifest_path.exists() {
        return Err(SynthError::Collision(manifest_path));
    }
    for sub in ["images", "labels"] {
        let p = out_dir.join(sub);
        if p.read_dir().map(|mut d| d.next().is_some()).unwrap_or(false) {
            return Err(SynthError::Collision(p));
        }
    }
    let mut m = DatasetManifest::new(name, Some(Source::Synthetic), vec!["buoy".into()]);
    m.base_dir = out_dir.to_path_buf();
    for i in 0..n {
        let scene = render(i)?;
        let image = format!("images/{i:06}.png");
        let path = out_dir.join(&image);
        crate::io::write_png_atomic(&path, &scene.image)
            .map_err(|source| SynthError::Io { path, source })?;
        m.entries.push(ManifestEntry {
            image,
            dims: scene.dims(),
            labels: format!("labels/{i:06}.txt"),
            source: Source::Synthetic,
            split: None,
            annotations: scene.annotations,
        });
    }
    m.write_labels()?;
    m.save(&manifest_path)?;
    Ok(m)
}

/// What prediction perturbation needs from a scene.
#[derive(Debug, Clone, Copy)]
pub struct SceneView<'a> {
    pub image: &'a RgbImage,
    pub annotations: &'a [Annotation],
    pub horizon_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorModel {
    /// Probability that a ground-truth object is missed outright.
    pub drop_rate: f64,
    /// Box jitter standard deviation as a fraction of box size.
    pub jitter_sigma: f64,
    /// Expected spurious detections per image.
    pub spurious_rate: f64,
    pub conf: ConfModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfModel {
    pub tp_range: (f64, f64),
    pub fp_range: (f64, f64),
    /// Scale keep probability, jitter and confidence by each object's
    /// measured contrast against its surroundings in the final image.
    pub contrast_aware: bool,
}

impl Default for ConfModel {
    fn default() -> Self {
        Self {
            tp_range: (0.6, 0.95),
            fp_range: (0.05, 0.55),
            contrast_aware: false,
        }
    }
}

impl Default for ErrorModel {
    fn default() -> Self {
        Self {
            drop_rate: 0.0,
            jitter_sigma: 0.0,
            spurious_rate: 0.0,
            conf: ConfModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbed {
    pub detections: Vec<Detection>,
    /// Ground-truth indices that produced a detection.
    pub kept: Vec<usize>,
    pub spurious: usize,
    pub total_gt: usize,
}

impl Perturbed {
    pub fn intended_tp(&self) -> usize {
        self.kept.len()
    }

    pub fn intended_fp(&self) -> usize {
        self.spurious
    }

    pub fn intended_fn(&self) -> usize {
        self.total_gt - self.kept.len()
    }
}

/// Detectability in (0, 1): luma contrast between a box's core and a ring
/// around it, discounted by the ring's texture.
pub fn detectability(image: &RgbImage, bbox: &BBoxNorm) -> f64 {
    let dims = ImageDims {
        width: image.width(),
        height: image.height(),
    };
    let b = bbox.to_abs(dims);
    let (cx, cy) = b.center();
    let (hw, hh) = (b.width() / 2.0, b.height() / 2.0);
    let mut inner = Vec::new();
    let mut ring = Vec::new();
    let x0 = (cx - 2.0 * hw).floor().max(0.0) as u32;
    let y0 = (cy - 2.0 * hh).floor().max(0.0) as u32;
    let x1 = ((cx + 2.0 * hw).ceil() as u32).min(dims.width);
    let y1 = ((cy + 2.0 * hh).ceil() as u32).min(dims.height);
    for y in y0..y1 {
        for x in x0..x1 {
            let (u, v) = ((x as f64 + 0.5 - cx) / hw.max(0.5), (y as f64 + 0.5 - cy) / hh.max(0.5));
            let p = image.get_pixel(x, y);
            let luma = (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0;
            let r2 = u * u + v * v;
            if r2 <= 0.25 {
                inner.push(luma);
            } else if u.abs() > 1.0 || v.abs() > 1.0 {
                ring.push(luma);
            }
        }
    }
    if inner.is_empty() || ring.is_empty() {
        return 0.5;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mi, mr) = (mean(&inner), mean(&ring));
    let sr = (ring.iter().map(|x| (x - mr).powi(2)).sum::<f64>() / ring.len() as f64).sqrt();
    let delta = (mi - mr).abs();
    (delta / (delta + 0.05 + sr)).clamp(0.01, 0.99)
}

/// Manufactures a prediction set with known composition from a scene.
///
/// Every ground-truth object draws from its own stream (derived from
/// `seed` and its index), so the same seed yields coupled outcomes across
/// different renderings of the same geometry.
pub fn perturb_predictions(scene: SceneView<'_>, model: &ErrorModel, seed: u64) -> Perturbed {
    let dims = ImageDims {
        width: scene.image.width(),
        height: scene.image.height(),
    };
    let canvas = dims.full_box();
    let mut detections = Vec::new();
    let mut kept = Vec::new();
    for (i, gt) in scene.annotations.iter().enumerate() {
        let mut rng = SplitMix64::derive(seed, &[1, i as u64]);
        let u_keep = rng.unit();
        let u_conf = rng.unit();
        let z: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
        let d = if model.conf.contrast_aware {
            detectability(scene.image, &gt.bbox)
        } else {
            1.0
        };
        if u_keep >= (1.0 - model.drop_rate) * d {
            continue;
        }
        let sigma = model.jitter_sigma * (2.0 - d);
        let b = gt.bbox.to_abs(dims);
        let (w, h) = (b.width(), b.height());
        let (cx, cy) = b.center();
        let (cx, cy) = (cx + z[0] * sigma * w, cy + z[1] * sigma * h);
        let (w, h) = (w * (z[2] * sigma).exp(), h * (z[3] * sigma).exp());
        let jittered = BBoxAbs {
            x1: cx - w / 2.0,
            y1: cy - h / 2.0,
            x2: cx + w / 2.0,
            y2: cy + h / 2.0,
        };
        let Some(bbox) = jittered.clip(&canvas).and_then(|c| c.to_norm(dims).ok()) else {
            continue;
        };
        let (lo, hi) = model.conf.tp_range;
        let conf = (lo + (hi - lo) * u_conf) * if model.conf.contrast_aware { d } else { 1.0 };
        detections.push(Detection::new(gt.class_id, bbox, conf.clamp(0.0, 1.0)));
        kept.push(i);
    }

    let mut rng = SplitMix64::derive(seed, &[2]);
    let whole = model.spurious_rate.floor();
    let n_spurious = whole as usize + usize::from(rng.chance(model.spurious_rate - whole));
    let sea_top = scene.horizon_y * dims.h();
    let gt_boxes: Vec<BBoxAbs> = scene.annotations.iter().map(|a| a.bbox.to_abs(dims)).collect();
    let mut spurious = 0;
    for _ in 0..n_spurious {
        for _attempt in 0..20 {
            let bw = rng.uniform(0.01, 0.06) * dims.w();
            let bh = bw * rng.uniform(0.6, 1.0);
            let cx = rng.uniform(bw / 2.0, dims.w() - bw / 2.0);
            let cy = rng.uniform(sea_top + bh / 2.0, (dims.h() - bh / 2.0).max(sea_top + bh / 2.0));
            let u_conf = rng.unit();
            let cand = BBoxAbs {
                x1: cx - bw / 2.0,
                y1: cy - bh / 2.0,
                x2: cx + bw / 2.0,
                y2: cy + bh / 2.0,
            };
            if gt_boxes.iter().any(|g| g.intersection_area(&cand) > 0.0) {
                continue;
            }
            let Some(bbox) = cand.clip(&canvas).and_then(|c| c.to_norm(dims).ok()) else {
                continue;
            };
            let (lo, hi) = model.conf.fp_range;
            detections.push(Detection::new(0, bbox, lo + (hi - lo) * u_conf));
            spurious += 1;
            break;
        }
    }
    Perturbed {
        detections,
        kept,
        spurious,
        total_gt: scene.annotations.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SceneConfig {
        SceneConfig {
            dims: ImageDims::new(320, 240).unwrap(),
            ..Default::default()
        }
    }

    #[test]
    fn ten_visible_buoys_ten_annotations() {
        // Two rows pulled toward the center so every buoy is in frame.
        let cfg = SceneConfig {
            n_lines: 2,
            buoys_per_line: 5,
            near_radius: 0.03,
            decay: 0.8,
            ..small()
        };
        let s = generate_scene(&cfg).unwrap();
        let annotated = s.buoys.iter().filter(|b| b.visibility >= MIN_VISIBILITY).count();
        assert_eq!(s.annotations.len(), annotated);
        if s.buoys.iter().all(|b| b.visibility >= MIN_VISIBILITY) {
            assert_eq!(s.annotations.len(), 10);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = small().with_weather(Weather::Adverse);
        let a = generate_scene(&cfg).unwrap();
        let b = generate_scene(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_scene(&SceneConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.image, c.image);
    }

    #[test]
    fn radii_follow_geometric_sequence() {
        let cfg = SceneConfig {
            decay: 0.7,
            buoys_per_line: 5,
            ..small()
        };
        let s = generate_scene(&cfg).unwrap();
        let r0 = cfg.near_radius * cfg.dims.h();
        for b in &s.buoys {
            let want = r0 * 0.7f64.powi(b.depth as i32);
            assert!((b.radius_x - want).abs() <= 1.0);
        }
    }

    #[test]
    fn empty_scene_is_valid() {
        let s = generate_scene(&SceneConfig {
            n_lines: 0,
            ..small()
        })
        .unwrap();
        assert!(s.annotations.is_empty());
        assert_eq!(s.image, s.clean);
    }

    #[test]
    fn weather_keeps_geometry() {
        let clear = generate_scene(&small()).unwrap();
        let foggy = generate_scene(&small().with_weather(Weather::Adverse)).unwrap();
        assert_eq!(clear.annotations, foggy.annotations);
        assert_eq!(clear.clean, foggy.clean);
        assert_ne!(clear.image, foggy.image);
    }

    #[test]
    fn config_validation() {
        assert!(generate_scene(&SceneConfig {
            horizon_y: 1.0,
            ..small()
        })
        .is_err());
        assert!(generate_scene(&SceneConfig {
            decay: 0.0,
            ..small()
        })
        .is_err());
        assert!(matches!(generate_scenes(&small(), 0, 0), Err(SynthError::Empty)));
    }

    #[test]
    fn perfect_perturbation_reproduces_truth() {
        let s = generate_scene(&small()).unwrap();
        let p = perturb_predictions(s.view(), &ErrorModel::default(), 3);
        assert_eq!(p.detections.len(), s.annotations.len());
        for (d, a) in p.detections.iter().zip(&s.annotations) {
            assert!((d.bbox.iou(&a.bbox) - 1.0).abs() < 1e-9);
        }
        assert_eq!(p.intended_fn(), 0);
    }

    #[test]
    fn spurious_boxes_avoid_ground_truth() {
        let s = generate_scene(&small()).unwrap();
        let m = ErrorModel {
            drop_rate: 1.0,
            spurious_rate: 5.0,
            ..Default::default()
        };
        let p = perturb_predictions(s.view(), &m, 3);
        assert_eq!(p.kept.len(), 0);
        assert_eq!(p.detections.len(), p.spurious);
        assert!(p.spurious > 0);
        for d in &p.detections {
            assert!(s.annotations.iter().all(|a| d.bbox.iou(&a.bbox) == 0.0));
            let sea_top = s.config.horizon_y;
            assert!(d.bbox.cy >= sea_top);
        }
    }

    #[test]
    fn fog_reduces_detectability() {
        let clear = generate_scene(&small()).unwrap();
        let foggy = generate_scene(&small().with_weather(Weather::Foggy)).unwrap();
        let mean = |s: &SceneTruth| {
            s.annotations.iter().map(|a| detectability(&s.image, &a.bbox)).sum::<f64>()
                / s.annotations.len() as f64
        };
        assert!(mean(&foggy) < mean(&clear));
    }
}
