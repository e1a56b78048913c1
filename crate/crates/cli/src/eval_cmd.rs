use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use clap::Args;
use detkit::bench::BenchStats;
use detkit::dataset::{parse_detections, DatasetManifest};
use detkit::evaluation::{evaluate as run_eval, images_for, CrossMatrix, EvalResult, PredictionSet};
use detkit::io::write_atomic;
use detkit::postprocess::PostprocessConfig;
use detkit::report::{
    best_balance, emit_ablation_matrix, emit_grouped_bars, emit_performance_table, evaluation_csv, fmt_fixed, Metric,
    ReportEntry, ReportSpec,
};
use serde::{Deserialize, Serialize};

use crate::util::{collect_inputs, files_with_ext, require_exists, usage, CliError, Classify, CliResult};
use crate::{report_written, GlobalOptions};

/// One evaluation result as written by `evaluate` and read by `report`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub model: String,
    pub test_set: String,
    pub postprocess: Option<PostprocessConfig>,
    pub result: EvalResult,
}

/// One benchmark result as written by `bench` and read by `report`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRecord {
    pub model: String,
    pub stats: BenchStats,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Ground-truth manifest
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of <image id>.txt detection files (class cx cy w h conf)
    #[arg(long)]
    pub detections: PathBuf,
    /// Model name (default: the detections directory's parent name)
    #[arg(long)]
    pub model: Option<String>,
    /// Test-set name (default: the manifest's name)
    #[arg(long)]
    pub test_set: Option<String>,
    /// Confidence threshold [default: 0.001]
    #[arg(long)]
    pub conf: Option<f64>,
    /// NMS IoU threshold [default: 0.65]
    #[arg(long)]
    pub nms_iou: Option<f64>,
    /// Max detections per image after NMS [default: 300]
    #[arg(long)]
    pub max_det: Option<usize>,
    /// Evaluate detections as given, without filtering or NMS
    #[arg(long)]
    pub no_postprocess: bool,
}

pub fn load_predictions(dir: &Path) -> CliResult<PredictionSet> {
    let mut set = PredictionSet::new();
    for p in files_with_ext(dir, "txt")? {
        let id = p.file_stem().expect("file has a stem").to_string_lossy().into_owned();
        let text = std::fs::read_to_string(&p).data()?;
        let dets = parse_detections(&text).map_err(|e| CliError::Data(anyhow!("{}: {e}", p.display())))?;
        set.insert(id, dets);
    }
    Ok(set)
}

pub fn evaluate(g: &GlobalOptions, a: &EvaluateArgs) -> CliResult {
    require_exists(&a.manifest, "manifest")?;
    require_exists(&a.detections, "detections directory")?;
    let mut post = g.config()?.postprocess.unwrap_or_default();
    if let Some(v) = a.conf {
        post.conf_threshold = v;
    }
    if let Some(v) = a.nms_iou {
        post.nms_iou_threshold = v;
    }
    if let Some(v) = a.max_det {
        post.max_detections = v;
    }
    post.validate().or_else(|e| usage(e.to_string()))?;
    let post = (!a.no_postprocess).then_some(post);

    let manifest = DatasetManifest::load(&a.manifest).data()?;
    let preds = load_predictions(&a.detections)?;
    let images = images_for(&manifest, &preds, post.as_ref()).data()?;
    let result = run_eval(&images).data()?;

    let model = a.model.clone().unwrap_or_else(|| {
        let d = a.detections.canonicalize().unwrap_or_else(|_| a.detections.clone());
        d.parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into())
    });
    let test_set = a.test_set.clone().unwrap_or_else(|| manifest.name.clone());
    let record = EvalRecord {
        model: model.clone(),
        test_set: test_set.clone(),
        postprocess: post,
        result: result.clone(),
    };
    let dir = g.out_dir("eval").join(&model);
    let json = serde_json::to_string_pretty(&record).internal()? + "\n";
    let jp = dir.join(format!("{test_set}.json"));
    let cp = dir.join(format!("{test_set}.csv"));
    write_atomic(&jp, json.as_bytes()).internal()?;
    write_atomic(&cp, evaluation_csv(&[(model.clone(), test_set.clone(), result.clone())]).as_bytes()).internal()?;
    report_written(g, &[jp, cp]);
    if result.no_ground_truth {
        eprintln!("warning: {test_set} has no ground truth; AP reported as 0");
    }
    println!(
        "{model} on {test_set}: F1 {} P {} R {} mAP {} mAP@0.5 {}",
        fmt_fixed(result.f1, 3),
        fmt_fixed(result.precision, 3),
        fmt_fixed(result.recall, 3),
        fmt_fixed(result.map, 3),
        fmt_fixed(result.map50, 3)
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation JSON files or directories of them
    #[arg(long, required = true, num_args = 1..)]
    pub eval: Vec<PathBuf>,
    /// Benchmark JSON files or directories of them
    #[arg(long, num_args = 1..)]
    pub bench: Vec<PathBuf>,
    /// Test set for the per-model performance table (default: first seen)
    #[arg(long)]
    pub primary: Option<String>,
    /// Adverse-weather test set; the paired figure compares it with each
    /// model's own test set (the test set named like the model)
    #[arg(long)]
    pub adverse: Option<String>,
    /// Real-time requirement in FPS
    #[arg(long, default_value_t = detkit::bench::DEFAULT_REALTIME_FPS)]
    pub requirement: f64,
}

fn read_json<T: for<'de> Deserialize<'de>>(p: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(p).data()?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(anyhow!("{}: {e}", p.display())))
}

fn push_unique(v: &mut Vec<String>, s: &str) {
    if !v.iter().any(|x| x == s) {
        v.push(s.to_string());
    }
}

pub fn report(g: &GlobalOptions, a: &ReportArgs) -> CliResult {
    if !(a.requirement > 0.0) {
        return usage("--requirement must be positive");
    }
    let evals: Vec<EvalRecord> = collect_inputs(&a.eval, "json")?
        .iter()
        .map(|p| read_json(p))
        .collect::<CliResult<_>>()?;
    let benches: Vec<BenchRecord> = collect_inputs(&a.bench, "json")?
        .iter()
        .map(|p| read_json(p))
        .collect::<CliResult<_>>()?;
    if evals.is_empty() {
        return usage("no evaluation files found");
    }

    let mut models = Vec::new();
    let mut test_sets = Vec::new();
    let mut cells: BTreeMap<(String, String), EvalResult> = BTreeMap::new();
    for r in &evals {
        push_unique(&mut models, &r.model);
        push_unique(&mut test_sets, &r.test_set);
        if cells.insert((r.model.clone(), r.test_set.clone()), r.result.clone()).is_some() {
            return Err(CliError::Data(anyhow!("two results for {} on {}", r.model, r.test_set)));
        }
    }
    let mut bench_by_model = BTreeMap::new();
    for b in &benches {
        push_unique(&mut models, &b.model);
        if bench_by_model.insert(b.model.clone(), b.stats.clone()).is_some() {
            return Err(CliError::Data(anyhow!("two benchmark results for {}", b.model)));
        }
    }
    let primary = a.primary.clone().unwrap_or_else(|| test_sets[0].clone());
    if !test_sets.contains(&primary) {
        return usage(format!("no results for test set {primary:?}"));
    }

    let spec = ReportSpec::new(
        models
            .iter()
            .map(|m| ReportEntry {
                model: m.clone(),
                eval: cells.get(&(m.clone(), primary.clone())).cloned(),
                bench: bench_by_model.get(m).cloned(),
            })
            .collect(),
    )
    .data()?;

    let root = g.out_dir("report");
    let mut written = emit_performance_table(&spec, &root).internal()?;
    let metrics: &[Metric] = if bench_by_model.is_empty() {
        &[Metric::F1, Metric::Map, Metric::Map50]
    } else {
        &[Metric::Map, Metric::Map50, Metric::Fps]
    };
    written.push(emit_grouped_bars(&spec, metrics, &format!("Models on {primary}"), &root, "metrics").internal()?);

    let rows: Vec<(String, String, EvalResult)> = evals
        .iter()
        .map(|r| (r.model.clone(), r.test_set.clone(), r.result.clone()))
        .collect();
    let ep = root.join("tables/evaluation.csv");
    write_atomic(&ep, evaluation_csv(&rows).as_bytes()).internal()?;
    written.push(ep);

    if test_sets.len() > 1 {
        let eval_models: Vec<String> = models.iter().filter(|m| cells.keys().any(|(x, _)| x == *m)).cloned().collect();
        let matrix = CrossMatrix {
            cells: eval_models
                .iter()
                .map(|m| test_sets.iter().map(|t| cells.get(&(m.clone(), t.clone())).cloned()).collect())
                .collect(),
            models: eval_models,
            test_sets: test_sets.clone(),
        };
        let files = emit_ablation_matrix(&matrix, a.adverse.as_deref(), &root).internal()?;
        if a.adverse.is_some() && !files.iter().any(|p| p.ends_with("adverse.svg")) {
            eprintln!("warning: no model has results on both a same-named test set and the adverse set; adverse.svg skipped");
        }
        written.extend(files);
    }

    let mut summary = format!("Primary test set: {primary}\n");
    match best_balance(&spec, a.requirement) {
        Some(m) => summary.push_str(&format!(
            "Best balance (highest mAP at >= {} FPS): {m}\n",
            fmt_fixed(a.requirement, 1)
        )),
        None if bench_by_model.is_empty() => {}
        None => summary.push_str(&format!("No model reaches {} FPS\n", fmt_fixed(a.requirement, 1))),
    }
    for e in &spec.entries {
        if let Some(b) = &e.bench {
            let verdict = if b.valid && b.fps >= a.requirement { "real-time" } else { "not real-time" };
            summary.push_str(&format!("{}: {} FPS, {verdict}\n", e.model, fmt_fixed(b.fps, 1)));
        }
    }
    let sp = root.join("tables/summary.txt");
    write_atomic(&sp, summary.as_bytes()).internal()?;
    written.push(sp);
    report_written(g, &written);
    print!("{summary}");
    println!("{} files in {}", written.len(), root.display());
    Ok(())
}
