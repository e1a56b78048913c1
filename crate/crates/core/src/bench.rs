//! Latency, FPS and memory benchmarking of an opaque inference target.
//!
//! FPS is derived from the mean latency (`1000 / mean_ms`), not the median.
//! Peak memory is the harness process's resident set (plus a target child
//! process when there is one), sampled by a background thread. It is a
//! host-memory figure and is not comparable with GPU memory readings.

use std::io::{BufRead, BufReader, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::fmt_fixed;

/// Capture rate of the deployment cameras.
pub const DEFAULT_REALTIME_FPS: f64 = 15.0;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench config: {0}")]
    Config(String),
    #[error("no inputs to benchmark")]
    NoInputs,
    #[error("no models to report")]
    EmptyReport,
    #[error("target failed: {0}")]
    Target(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub warmup: usize,
    pub iterations: usize,
    pub realtime_fps: f64,
    /// Memory sampling period; `None` disables the observer.
    pub memory_poll_ms: Option<u64>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            warmup: 10,
            iterations: 100,
            realtime_fps: DEFAULT_REALTIME_FPS,
            memory_poll_ms: Some(50),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.iterations == 0 {
            return Err(BenchError::Config("iterations must be >= 1".into()));
        }
        if !(self.realtime_fps > 0.0 && self.realtime_fps.is_finite()) {
            return Err(BenchError::Config("realtime_fps must be > 0".into()));
        }
        if self.memory_poll_ms == Some(0) {
            return Err(BenchError::Config("memory_poll_ms must be > 0".into()));
        }
        Ok(())
    }
}

/// Mean/median/p95 of a latency sample and the FPS implied by the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub fps: f64,
}

impl LatencySummary {
    /// `None` for an empty sample.
    pub fn from_latencies(latencies_ms: &[f64]) -> Option<Self> {
        if latencies_ms.is_empty() {
            return None;
        }
        let mut sorted = latencies_ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let mean_ms = sorted.iter().sum::<f64>() / n as f64;
        let median_ms = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        // Nearest-rank percentile.
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Some(Self {
            mean_ms,
            median_ms,
            p95_ms: sorted[rank - 1],
            fps: 1000.0 / mean_ms,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchStats {
    /// Measured iterations only, in call order.
    pub latencies_ms: Vec<f64>,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub fps: f64,
    pub peak_memory_mb: Option<f64>,
    pub realtime_fps: f64,
    pub feasible: bool,
    /// False when the run aborted early; the stats cover completed calls.
    pub valid: bool,
    pub error: Option<String>,
    /// Timing reported by the target for the model call alone, when it
    /// reports one. The top-level fields time the whole call.
    pub callable: Option<LatencySummary>,
}

impl BenchStats {
    pub fn from_latencies(latencies_ms: Vec<f64>, realtime_fps: f64) -> Self {
        let summary = LatencySummary::from_latencies(&latencies_ms);
        let (mean_ms, median_ms, p95_ms, fps) = summary
            .map(|s| (s.mean_ms, s.median_ms, s.p95_ms, s.fps))
            .unwrap_or((f64::NAN, f64::NAN, f64::NAN, 0.0));
        Self {
            valid: summary.is_some(),
            latencies_ms,
            mean_ms,
            median_ms,
            p95_ms,
            fps,
            peak_memory_mb: None,
            realtime_fps,
            feasible: summary.is_some() && fps >= realtime_fps,
            error: None,
            callable: None,
        }
    }

    /// Stats from a published mean latency, for fixture rows.
    pub fn from_mean(mean_ms: f64, peak_memory_mb: Option<f64>, realtime_fps: f64) -> Self {
        Self {
            peak_memory_mb,
            ..Self::from_latencies(vec![mean_ms], realtime_fps)
        }
    }
}

/// Something that turns one input into detections.
pub trait BenchTarget {
    type Input;

    /// Runs one inference. Returns the model-only time when the target can
    /// measure it apart from its own pre/postprocessing.
    fn call(&mut self, input: &Self::Input) -> Result<Option<Duration>, String>;

    /// A child process whose memory should be sampled too.
    fn child_pid(&self) -> Option<u32> {
        None
    }
}

/// Adapts a closure into a [`BenchTarget`].
pub struct FnTarget<I, F> {
    f: F,
    _input: PhantomData<fn(&I)>,
}

impl<I, F: FnMut(&I) -> Result<(), String>> FnTarget<I, F> {
    pub fn new(f: F) -> Self {
        Self { f, _input: PhantomData }
    }
}

impl<I, F: FnMut(&I) -> Result<(), String>> BenchTarget for FnTarget<I, F> {
    type Input = I;

    fn call(&mut self, input: &I) -> Result<Option<Duration>, String> {
        (self.f)(input).map(|_| None)
    }
}

/// Resident set size of a process in MB, from `/proc/<pid>/status`.
pub fn resident_mb(pid: Option<u32>) -> Option<f64> {
    let path = match pid {
        Some(p) => format!("/proc/{p}/status"),
        None => "/proc/self/status".to_string(),
    };
    let text = std::fs::read_to_string(path).ok()?;
    let line = text.lines().find(|l| l.starts_with("VmRSS:"))?;
    let kb: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb / 1024.0)
}

struct MemoryObserver {
    stop: Arc<AtomicBool>,
    peak: Arc<Mutex<Option<f64>>>,
    handle: thread::JoinHandle<()>,
}

impl MemoryObserver {
    fn start(period: Duration, child: Option<u32>) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let peak = Arc::new(Mutex::new(None));
        let (s, p) = (stop.clone(), peak.clone());
        let handle = thread::spawn(move || loop {
            let own = resident_mb(None);
            let sample = match (own, child.and_then(|c| resident_mb(Some(c)))) {
                (Some(a), Some(b)) => Some(a + b),
                (a, b) => a.or(b),
            };
            if let Some(v) = sample {
                let mut g = p.lock().expect("memory observer lock");
                *g = Some(g.map_or(v, |old: f64| old.max(v)));
            }
            if s.load(Ordering::Relaxed) {
                break;
            }
            thread::sleep(period);
        });
        Self { stop, peak, handle }
    }

    fn finish(self) -> Option<f64> {
        self.stop.store(true, Ordering::Relaxed);
        let _ = self.handle.join();
        *self.peak.lock().expect("memory observer lock")
    }
}

/// Warms up, then times `cfg.iterations` calls cycling over `inputs`.
///
/// A target failure during the measured phase stops the run; the stats
/// cover the completed calls and are flagged invalid. A failure during
/// warmup is returned as an error.
pub fn run_bench<T: BenchTarget>(
    target: &mut T,
    inputs: &[T::Input],
    cfg: &BenchConfig,
) -> Result<BenchStats, BenchError> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(BenchError::NoInputs);
    }
    for i in 0..cfg.warmup {
        target.call(&inputs[i % inputs.len()]).map_err(BenchError::Target)?;
    }
    let observer = cfg
        .memory_poll_ms
        .map(|ms| MemoryObserver::start(Duration::from_millis(ms), target.child_pid()));

    let mut latencies = Vec::with_capacity(cfg.iterations);
    let mut inner = Vec::with_capacity(cfg.iterations);
    let mut error = None;
    for i in 0..cfg.iterations {
        let start = Instant::now();
        let res = target.call(&inputs[i % inputs.len()]);
        let elapsed = start.elapsed();
        match res {
            Ok(model_time) => {
                latencies.push(elapsed.as_secs_f64() * 1000.0);
                if let Some(d) = model_time {
                    inner.push(d.as_secs_f64() * 1000.0);
                }
            }
            Err(e) => {
                error = Some(e);
                break;
            }
        }
    }

    let mut stats = BenchStats::from_latencies(latencies, cfg.realtime_fps);
    stats.peak_memory_mb = observer.and_then(MemoryObserver::finish);
    if inner.len() == stats.latencies_ms.len() {
        stats.callable = LatencySummary::from_latencies(&inner);
    }
    if error.is_some() {
        stats.valid = false;
        stats.error = error;
    }
    Ok(stats)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandMode {
    /// One process per image: `program args.. <image> <out>`, or with
    /// `{image}` / `{out}` placeholders substituted in `args`.
    PerCall,
    /// One long-lived process reading `<image>\t<out>` lines on stdin and
    /// answering each with `ok`, `ok <model-ms>` or `err <message>`.
    Persistent,
}

/// An external detector plugged in as a command.
pub struct CommandTarget {
    program: String,
    args: Vec<String>,
    mode: CommandMode,
    out_dir: PathBuf,
    proc: Option<(Child, ChildStdin, BufReader<ChildStdout>)>,
}

impl CommandTarget {
    pub fn new(program: impl Into<String>, args: Vec<String>, mode: CommandMode, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
            args,
            mode,
            out_dir: out_dir.into(),
            proc: None,
        }
    }

    fn out_path(&self, image: &Path) -> PathBuf {
        let stem = image.file_stem().unwrap_or_default();
        self.out_dir.join(stem).with_extension("txt")
    }

    fn call_once(&self, image: &Path, out: &Path) -> Result<(), String> {
        let has_placeholder = self.args.iter().any(|a| a.contains("{image}") || a.contains("{out}"));
        let mut cmd = Command::new(&self.program);
        for a in &self.args {
            cmd.arg(
                a.replace("{image}", &image.to_string_lossy())
                    .replace("{out}", &out.to_string_lossy()),
            );
        }
        if !has_placeholder {
            cmd.arg(image).arg(out);
        }
        let status = cmd
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .status()
            .map_err(|e| format!("{}: {e}", self.program))?;
        if status.success() {
            Ok(())
        } else {
            Err(format!("{} exited with {status}", self.program))
        }
    }

    fn ensure_started(&mut self) -> Result<(), String> {
        if self.proc.is_some() {
            return Ok(());
        }
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| format!("{}: {e}", self.program))?;
        let stdin = child.stdin.take().ok_or("no stdin")?;
        let stdout = BufReader::new(child.stdout.take().ok_or("no stdout")?);
        self.proc = Some((child, stdin, stdout));
        Ok(())
    }

    fn call_persistent(&mut self, image: &Path, out: &Path) -> Result<Option<Duration>, String> {
        self.ensure_started()?;
        let (_, stdin, stdout) = self.proc.as_mut().expect("started");
        writeln!(stdin, "{}\t{}", image.display(), out.display())
            .and_then(|_| stdin.flush())
            .map_err(|e| format!("write to target: {e}"))?;
        let mut line = String::new();
        let n = stdout.read_line(&mut line).map_err(|e| format!("read from target: {e}"))?;
        if n == 0 {
            return Err("target closed its output".into());
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("ok") => match parts.next() {
                Some(ms) => ms
                    .parse::<f64>()
                    .map(|ms| Some(Duration::from_secs_f64(ms.max(0.0) / 1000.0)))
                    .map_err(|_| format!("bad timing in reply: {}", line.trim())),
                None => Ok(None),
            },
            _ => Err(format!("target reported: {}", line.trim())),
        }
    }
}

impl BenchTarget for CommandTarget {
    type Input = PathBuf;

    fn call(&mut self, image: &PathBuf) -> Result<Option<Duration>, String> {
        let out = self.out_path(image);
        match self.mode {
            CommandMode::PerCall => self.call_once(image, &out).map(|_| None),
            CommandMode::Persistent => self.call_persistent(image, &out),
        }
    }

    fn child_pid(&self) -> Option<u32> {
        self.proc.as_ref().map(|(c, _, _)| c.id())
    }
}

impl Drop for CommandTarget {
    fn drop(&mut self) {
        if let Some((mut child, stdin, _)) = self.proc.take() {
            drop(stdin);
            if child.wait_timeout_or_kill().is_err() {
                let _ = child.kill();
            }
        }
    }
}

trait WaitOrKill {
    fn wait_timeout_or_kill(&mut self) -> std::io::Result<()>;
}

impl WaitOrKill for Child {
    /// Gives the child a moment to exit after stdin closes, then kills it.
    fn wait_timeout_or_kill(&mut self) -> std::io::Result<()> {
        let deadline = Instant::now() + Duration::from_secs(2);
        while Instant::now() < deadline {
            if self.try_wait()?.is_some() {
                return Ok(());
            }
            thread::sleep(Duration::from_millis(10));
        }
        self.kill()?;
        self.wait().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityRow {
    pub model: String,
    pub latency_ms: f64,
    pub fps: f64,
    pub memory_mb: Option<f64>,
    pub feasible: bool,
}

/// One row per model, sorted by FPS descending (stable), with verdicts
/// recomputed against `requirement`.
pub fn feasibility_report(stats: &[(String, BenchStats)], requirement: f64) -> Result<Vec<FeasibilityRow>, BenchError> {
    if stats.is_empty() {
        return Err(BenchError::EmptyReport);
    }
    if !(requirement > 0.0) {
        return Err(BenchError::Config("requirement must be > 0".into()));
    }
    let mut rows: Vec<FeasibilityRow> = stats
        .iter()
        .map(|(model, s)| FeasibilityRow {
            model: model.clone(),
            latency_ms: s.mean_ms,
            fps: s.fps,
            memory_mb: s.peak_memory_mb,
            feasible: s.valid && s.fps >= requirement,
        })
        .collect();
    rows.sort_by(|a, b| b.fps.total_cmp(&a.fps));
    Ok(rows)
}

/// CSV in the layout of the time-metrics table: latency and FPS to one
/// decimal, memory to whole MB.
pub fn feasibility_csv(rows: &[FeasibilityRow]) -> String {
    let mut out = String::from("Model,Inference (ms),FPS,Memory (MB),Real-time\n");
    for r in rows {
        let mem = r.memory_mb.map(|m| fmt_fixed(m, 0)).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.model,
            fmt_fixed(r.latency_ms, 1),
            fmt_fixed(r.fps, 1),
            mem,
            if r.feasible { "yes" } else { "no" }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Vec<(String, BenchStats)> {
        [("tiny-640", 6.8, 972.0), ("full-640", 24.5, 1324.0), ("tiny-1280", 16.1, 1108.0), ("full-1280", 75.4, 1672.0)]
            .iter()
            .map(|&(m, ms, mem)| (m.to_string(), BenchStats::from_mean(ms, Some(mem), DEFAULT_REALTIME_FPS)))
            .collect()
    }

    #[test]
    fn summary_statistics() {
        let s = LatencySummary::from_latencies(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.mean_ms, 2.5);
        assert_eq!(s.median_ms, 2.5);
        assert_eq!(s.p95_ms, 4.0);
        assert_eq!(s.fps, 400.0);
        let lat: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(LatencySummary::from_latencies(&lat).unwrap().p95_ms, 95.0);
        assert!(LatencySummary::from_latencies(&[]).is_none());
    }

    #[test]
    fn published_rows() {
        let rows = feasibility_report(&table(), 15.0).unwrap();
        let names: Vec<&str> = rows.iter().map(|r| r.model.as_str()).collect();
        assert_eq!(names, ["tiny-640", "tiny-1280", "full-640", "full-1280"]);
        let verdicts: Vec<bool> = rows.iter().map(|r| r.feasible).collect();
        assert_eq!(verdicts, [true, true, true, false]);
        let csv = feasibility_csv(&rows);
        assert!(csv.contains("tiny-640,6.8,147.1,972,yes\n"));
        assert!(csv.contains("full-1280,75.4,13.3,1672,no\n"));
    }

    #[test]
    fn trivial_requirement_and_single_row() {
        assert!(feasibility_report(&table(), 0.001).unwrap().iter().all(|r| r.feasible));
        assert_eq!(feasibility_report(&table()[..1], 15.0).unwrap().len(), 1);
        assert!(matches!(feasibility_report(&[], 15.0), Err(BenchError::EmptyReport)));
    }

    #[test]
    fn warmup_excluded_and_failures_flagged() {
        let mut calls = 0;
        let mut t = FnTarget::new(|_: &u32| {
            calls += 1;
            if calls > 7 {
                Err("boom".to_string())
            } else {
                Ok(())
            }
        });
        let cfg = BenchConfig {
            warmup: 3,
            iterations: 10,
            memory_poll_ms: None,
            ..Default::default()
        };
        let stats = run_bench(&mut t, &[0], &cfg).unwrap();
        assert_eq!(stats.latencies_ms.len(), 4);
        assert!(!stats.valid);
        assert_eq!(stats.error.as_deref(), Some("boom"));
    }

    #[test]
    fn sleep_target_fps() {
        let mut t = FnTarget::new(|_: &()| {
            thread::sleep(Duration::from_millis(10));
            Ok(())
        });
        let cfg = BenchConfig {
            warmup: 2,
            iterations: 20,
            ..Default::default()
        };
        let stats = run_bench(&mut t, &[()], &cfg).unwrap();
        assert!(stats.valid);
        assert!((stats.fps - 100.0).abs() <= 10.0, "fps {}", stats.fps);
        assert!((stats.fps * stats.mean_ms - 1000.0).abs() < 1e-9);
        assert!(stats.peak_memory_mb.is_some());
    }

    #[test]
    fn config_validation() {
        let bad = BenchConfig {
            iterations: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(matches!(
            run_bench(&mut FnTarget::new(|_: &()| Ok(())), &[], &BenchConfig::default()),
            Err(BenchError::NoInputs)
        ));
    }
}
