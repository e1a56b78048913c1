//! `detkit`: dataset splitting, synthetic scenes, augmentation, evaluation,
//! benchmarking and reporting for object detectors.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

mod augment_cmd;
mod bench_cmd;
mod data_cmd;
mod eval_cmd;
mod overlay;
mod util;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use util::{CliError, CliResult, ConfigFile};

#[derive(Debug, Parser)]
#[command(name = "detkit", version, about = "Object-detection evaluation, augmentation and benchmarking toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOptions,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOptions {
    /// Seed for every random choice
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output root directory
    #[arg(long, global = true, env = "DETKIT_OUT", default_value = "detkit-out")]
    pub out: PathBuf,
    /// TOML config with optional [augment], [postprocess], [bench], [synth] and [perturb] tables
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = one per core). Results do not depend on it
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    /// More progress output on stderr (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

impl GlobalOptions {
    pub fn log(&self, level: u8, msg: impl AsRef<str>) {
        if self.verbose >= level {
            eprintln!("{}", msg.as_ref());
        }
    }

    pub fn out_dir(&self, sub: &str) -> PathBuf {
        self.out.join(sub)
    }

    pub fn config(&self) -> CliResult<ConfigFile> {
        ConfigFile::load(self.config.as_deref())
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a manifest 70/10/20 (by default) into train/val/test manifests
    Split(data_cmd::SplitArgs),
    /// Render synthetic buoy scenes with exact labels
    Synth(data_cmd::SynthArgs),
    /// Write synthetic predictions for a manifest from a known error model
    Perturb(data_cmd::PerturbArgs),
    /// Apply the augmentation recipe to a manifest
    Augment(augment_cmd::AugmentArgs),
    /// Postprocess detections and evaluate them against a manifest
    Evaluate(eval_cmd::EvaluateArgs),
    /// Time an external detector and judge real-time feasibility
    Bench(bench_cmd::BenchArgs),
    /// Build tables and figures from evaluation and benchmark results
    Report(eval_cmd::ReportArgs),
    /// Draw detection boxes and confidences onto image copies
    Overlay(overlay::OverlayArgs),
}

fn run(cli: Cli) -> CliResult {
    let g = &cli.global;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(g.jobs)
        .build()
        .map_err(|e| CliError::Internal(e.into()))?;
    pool.install(|| match &cli.command {
        Command::Split(a) => data_cmd::split(g, a),
        Command::Synth(a) => data_cmd::synth(g, a),
        Command::Perturb(a) => data_cmd::perturb(g, a),
        Command::Augment(a) => augment_cmd::augment(g, a),
        Command::Evaluate(a) => eval_cmd::evaluate(g, a),
        Command::Bench(a) => bench_cmd::bench(g, a),
        Command::Report(a) => eval_cmd::report(g, a),
        Command::Overlay(a) => overlay::overlay(g, a),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("detkit: {e}");
            e.exit_code()
        }
        Err(_) => ExitCode::from(3),
    }
}

/// Prints one line per written file, relative to the output root.
pub fn report_written(g: &GlobalOptions, paths: &[PathBuf]) {
    for p in paths {
        let shown = p.strip_prefix(&g.out).map(Path::to_path_buf).unwrap_or_else(|_| p.clone());
        g.log(1, format!("wrote {}", shown.display()));
    }
}
