use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::{Args, ValueEnum};
use detkit::bench::{feasibility_csv, feasibility_report, run_bench, BenchTarget, CommandMode, CommandTarget};
use detkit::dataset::{parse_detections, DatasetManifest};
use detkit::io::write_atomic;
use detkit::postprocess::{postprocess, PostprocessConfig};
use detkit::report::fmt_fixed;
use detkit::ImageDims;

use crate::eval_cmd::BenchRecord;
use crate::util::{files_with_ext, require_exists, usage, Classify, CliResult};
use crate::{report_written, GlobalOptions};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    /// Start the command once per image
    PerCall,
    /// Keep one process alive and send it one image per line
    Persistent,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Detector command; gets `<image> <out.txt>` (or {image}/{out} in --arg)
    #[arg(long, conflicts_with = "sleep_ms")]
    pub cmd: Option<String>,
    /// Extra argument for the command (repeatable)
    #[arg(long = "arg", allow_hyphen_values = true)]
    pub args: Vec<String>,
    #[arg(long, value_enum, default_value_t = Mode::PerCall)]
    pub mode: Mode,
    /// Built-in stand-in target that sleeps this long per image
    #[arg(long)]
    pub sleep_ms: Option<f64>,
    /// Directory of PNG images or a manifest
    #[arg(long)]
    pub images: PathBuf,
    /// Name for the results
    #[arg(long)]
    pub model: String,
    /// Discarded warm-up calls [default: 10]
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Timed calls [default: 100]
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Real-time requirement in FPS [default: 15]
    #[arg(long)]
    pub fps: Option<f64>,
    /// Memory sampling period in ms [default: 50]
    #[arg(long)]
    pub poll_ms: Option<u64>,
    /// Do not sample memory
    #[arg(long)]
    pub no_memory: bool,
}

enum Inner {
    Command(CommandTarget),
    Sleep(Duration),
}

/// Image decode, detector call, then detection parsing and postprocessing.
/// Reports the detector call alone as the model-only time.
struct PipelineTarget {
    inner: Inner,
    out_dir: PathBuf,
    post: PostprocessConfig,
}

impl BenchTarget for PipelineTarget {
    type Input = PathBuf;

    fn call(&mut self, input: &PathBuf) -> Result<Option<Duration>, String> {
        let img = image::open(input).map_err(|e| format!("{}: {e}", input.display()))?;
        let dims = ImageDims::new(img.width(), img.height()).map_err(|e| e.to_string())?;
        let start = Instant::now();
        let reported = match &mut self.inner {
            Inner::Command(c) => c.call(input)?,
            Inner::Sleep(d) => {
                std::thread::sleep(*d);
                None
            }
        };
        let model_time = reported.unwrap_or_else(|| start.elapsed());
        if let Inner::Command(_) = self.inner {
            let stem = input.file_stem().unwrap_or_default();
            let out = self.out_dir.join(stem).with_extension("txt");
            let text = std::fs::read_to_string(&out).map_err(|e| format!("{}: {e}", out.display()))?;
            let dets = parse_detections(&text).map_err(|e| format!("{}: {e}", out.display()))?;
            std::hint::black_box(postprocess(&dets, dims, &self.post));
        }
        Ok(Some(model_time))
    }

    fn child_pid(&self) -> Option<u32> {
        match &self.inner {
            Inner::Command(c) => c.child_pid(),
            Inner::Sleep(_) => None,
        }
    }
}

fn bench_images(path: &PathBuf) -> CliResult<Vec<PathBuf>> {
    if path.is_dir() {
        return files_with_ext(path, "png");
    }
    let m = DatasetManifest::load(path).data()?;
    Ok(m.entries.iter().map(|e| m.resolve(&e.image)).collect())
}

pub fn bench(g: &GlobalOptions, a: &BenchArgs) -> CliResult {
    require_exists(&a.images, "images")?;
    let file = g.config()?;
    let mut cfg = file.bench.unwrap_or_default();
    if let Some(v) = a.warmup {
        cfg.warmup = v;
    }
    if let Some(v) = a.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = a.fps {
        cfg.realtime_fps = v;
    }
    if let Some(v) = a.poll_ms {
        cfg.memory_poll_ms = Some(v);
    }
    if a.no_memory {
        cfg.memory_poll_ms = None;
    }
    cfg.validate().or_else(|e| usage(e.to_string()))?;

    let out_dir = g.out_dir("bench").join(format!("{}-detections", a.model));
    std::fs::create_dir_all(&out_dir).internal()?;
    let inner = match (&a.cmd, a.sleep_ms) {
        (Some(cmd), _) => {
            let mode = match a.mode {
                Mode::PerCall => CommandMode::PerCall,
                Mode::Persistent => CommandMode::Persistent,
            };
            Inner::Command(CommandTarget::new(cmd.clone(), a.args.clone(), mode, out_dir.clone()))
        }
        (None, Some(ms)) if ms >= 0.0 => Inner::Sleep(Duration::from_secs_f64(ms / 1000.0)),
        _ => return usage("give --cmd or a non-negative --sleep-ms"),
    };
    let inputs = bench_images(&a.images)?;
    if inputs.is_empty() {
        return usage(format!("no images in {}", a.images.display()));
    }
    let mut target = PipelineTarget {
        inner,
        out_dir,
        post: file.postprocess.unwrap_or_default(),
    };
    let stats = run_bench(&mut target, &inputs, &cfg).data()?;
    drop(target);

    let dir = g.out_dir("bench");
    let record = BenchRecord {
        model: a.model.clone(),
        stats: stats.clone(),
    };
    let jp = dir.join(format!("{}.json", a.model));
    write_atomic(&jp, (serde_json::to_string_pretty(&record).internal()? + "\n").as_bytes()).internal()?;
    let rows = feasibility_report(&[(a.model.clone(), stats.clone())], cfg.realtime_fps).internal()?;
    let cp = dir.join(format!("{}.csv", a.model));
    write_atomic(&cp, feasibility_csv(&rows).as_bytes()).internal()?;
    report_written(g, &[jp, cp]);

    let callable = stats
        .callable
        .map(|c| format!(", detector alone {} ms", fmt_fixed(c.mean_ms, 1)))
        .unwrap_or_default();
    println!(
        "{}: {} ms mean ({} median, {} p95){callable}, {} FPS, {}",
        a.model,
        fmt_fixed(stats.mean_ms, 1),
        fmt_fixed(stats.median_ms, 1),
        fmt_fixed(stats.p95_ms, 1),
        fmt_fixed(stats.fps, 1),
        if stats.feasible { "real-time" } else { "not real-time" }
    );
    if let Some(e) = &stats.error {
        eprintln!("warning: run aborted after {} calls: {e}", stats.latencies_ms.len());
        return Err(crate::util::CliError::Data(anyhow::anyhow!("target failed: {e}")));
    }
    Ok(())
}
