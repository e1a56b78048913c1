//! Tables and bar charts from evaluation and benchmark results.
//!
//! Everything here is a pure function of its inputs: no timestamps, fixed
//! layout constants, and numbers rounded half-up from their shortest
//! decimal representation (3 decimals for metrics, 1 for FPS/latency).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::BenchStats;
use crate::evaluation::{CrossMatrix, EvalResult};
use crate::io::write_atomic;

/// Placeholder for a cell with no data.
pub const ABSENT: &str = "—";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("duplicate model name in report: {0}")]
    DuplicateModel(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Formats `v` with `decimals` places, rounding half away from zero on the
/// shortest decimal string that round-trips to `v`. So `0.8645` becomes
/// `0.865` even though the nearest double is slightly below it.
pub fn fmt_fixed(v: f64, decimals: usize) -> String {
    if !v.is_finite() {
        return ABSENT.to_string();
    }
    let repr = format!("{}", v.abs());
    let (int_part, frac_part) = repr.split_once('.').unwrap_or((&repr, ""));
    let mut digits: Vec<u8> = int_part.bytes().chain(frac_part.bytes().chain(std::iter::repeat(b'0')).take(decimals)).map(|b| b - b'0').collect();
    let round_up = frac_part.as_bytes().get(decimals).is_some_and(|&d| d >= b'5');
    if round_up {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let split = digits.len() - decimals;
    let mut out = String::new();
    if v < 0.0 && digits.iter().any(|&d| d != 0) {
        out.push('-');
    }
    out.extend(digits[..split].iter().map(|d| (b'0' + d) as char));
    if decimals > 0 {
        out.push('.');
        out.extend(digits[split..].iter().map(|d| (b'0' + d) as char));
    }
    out
}

/// Metric columns, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    F1,
    Precision,
    Recall,
    Map,
    Map50,
    Fps,
}

impl Metric {
    pub const TABLE: [Metric; 5] = [Metric::F1, Metric::Precision, Metric::Recall, Metric::Map, Metric::Map50];

    pub fn label(self) -> &'static str {
        match self {
            Metric::F1 => "F1",
            Metric::Precision => "Precision",
            Metric::Recall => "Recall",
            Metric::Map => "mAP",
            Metric::Map50 => "mAP@0.5",
            Metric::Fps => "FPS",
        }
    }

    pub fn decimals(self) -> usize {
        match self {
            Metric::Fps => 1,
            _ => 3,
        }
    }

    pub fn of_eval(self, e: &EvalResult) -> Option<f64> {
        match self {
            Metric::F1 => Some(e.f1),
            Metric::Precision => Some(e.precision),
            Metric::Recall => Some(e.recall),
            Metric::Map => Some(e.map),
            Metric::Map50 => Some(e.map50),
            Metric::Fps => None,
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "f1" => Ok(Metric::F1),
            "precision" | "p" => Ok(Metric::Precision),
            "recall" | "r" => Ok(Metric::Recall),
            "map" => Ok(Metric::Map),
            "map50" | "map@0.5" => Ok(Metric::Map50),
            "fps" => Ok(Metric::Fps),
            other => Err(format!("unknown metric {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub model: String,
    pub eval: Option<EvalResult>,
    pub bench: Option<BenchStats>,
}

impl ReportEntry {
    pub fn metric(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Fps => self.bench.as_ref().filter(|b| b.valid).map(|b| b.fps),
            _ => self.eval.as_ref().and_then(|e| m.of_eval(e)),
        }
    }
}

/// Models in display order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportSpec {
    pub entries: Vec<ReportEntry>,
}

impl ReportSpec {
    pub fn new(entries: Vec<ReportEntry>) -> Result<Self, ReportError> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.model.as_str()) {
                return Err(ReportError::DuplicateModel(e.model.clone()));
            }
        }
        Ok(Self { entries })
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cell(v: Option<f64>, decimals: usize) -> String {
    v.map(|v| fmt_fixed(v, decimals)).unwrap_or_else(|| ABSENT.to_string())
}

/// Left-aligned first column, right-aligned rest, two-space gutters.
fn text_table(header: &[String], rows: &[Vec<String>]) -> String {
    let n = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            let pad = widths[i] - c.chars().count();
            if i == 0 {
                s.push_str(c);
                s.push_str(&" ".repeat(pad));
            } else {
                s.push_str("  ");
                s.push_str(&" ".repeat(pad));
                s.push_str(c);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    let total: usize = widths.iter().sum::<usize>() + 2 * n.saturating_sub(1);
    out.push_str(&"-".repeat(total));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

fn performance_rows(spec: &ReportSpec) -> Vec<Vec<String>> {
    spec.entries
        .iter()
        .map(|e| {
            let mut row = vec![e.model.clone()];
            row.extend(Metric::TABLE.iter().map(|&m| cell(e.metric(m), 3)));
            row
        })
        .collect()
}

fn performance_header(first: &str) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain(Metric::TABLE.iter().map(|m| m.label().to_string()))
        .collect()
}

/// `Model,F1,Precision,Recall,mAP,mAP@0.5`, one row per model.
pub fn performance_csv(spec: &ReportSpec) -> String {
    let mut out = performance_header("Model").join(",") + "\n";
    for row in performance_rows(spec) {
        let fields: Vec<String> = row.iter().map(|c| csv_field(c)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn performance_text(spec: &ReportSpec) -> String {
    text_table(&performance_header("Model"), &performance_rows(spec))
}

/// One row per (model, test set): `Model,Test set,F1,Precision,Recall,mAP,mAP@0.5`.
pub fn evaluation_csv(rows: &[(String, String, EvalResult)]) -> String {
    let mut out = String::from("Model,Test set,F1,Precision,Recall,mAP,mAP@0.5\n");
    for (model, test, e) in rows {
        let mut fields = vec![csv_field(model), csv_field(test)];
        fields.extend(Metric::TABLE.iter().map(|&m| cell(m.of_eval(e), 3)));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// The model with the highest mAP among those meeting the real-time
/// requirement.
pub fn best_balance(spec: &ReportSpec, requirement: f64) -> Option<&str> {
    spec.entries
        .iter()
        .filter(|e| e.bench.as_ref().is_some_and(|b| b.valid && b.fps >= requirement))
        .filter_map(|e| e.metric(Metric::Map).map(|m| (e, m)))
        .fold(None, |best: Option<(&ReportEntry, f64)>, (e, m)| match best {
            Some((_, bm)) if bm >= m => best,
            _ => Some((e, m)),
        })
        .map(|(e, _)| e.model.as_str())
}

/// Ablation layout: one row per training dataset, five metric columns per
/// test set.
pub fn ablation_csv(matrix: &CrossMatrix) -> String {
    let (header, rows) = ablation_cells(matrix);
    let mut out = header.iter().map(|h| csv_field(h)).collect::<Vec<_>>().join(",") + "\n";
    for r in rows {
        out.push_str(&r.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

pub fn ablation_text(matrix: &CrossMatrix) -> String {
    let (header, rows) = ablation_cells(matrix);
    text_table(&header, &rows)
}

fn ablation_cells(matrix: &CrossMatrix) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["Trained on".to_string()];
    for t in &matrix.test_sets {
        header.extend(Metric::TABLE.iter().map(|m| format!("{t} {}", m.label())));
    }
    let rows = matrix
        .models
        .iter()
        .zip(&matrix.cells)
        .map(|(model, row)| {
            let mut r = vec![model.clone()];
            for c in row {
                r.extend(Metric::TABLE.iter().map(|&m| cell(c.as_ref().and_then(|e| m.of_eval(e)), 3)));
            }
            r
        })
        .collect();
    (header, rows)
}

// ---- SVG ------------------------------------------------------------------

const SVG_HEIGHT: f64 = 420.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 70.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 70.0;
const BAR_WIDTH: f64 = 28.0;
const GROUP_GAP: f64 = 36.0;
const LEGEND_LINE: f64 = 16.0;
const FONT: &str = "font-family=\"DejaVu Sans, Arial, sans-serif\"";
const PALETTE: [&str; 6] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#b07aa1"];
const AXIS: &str = "#333333";

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Smallest 1/2/5·10^k at or above `v`.
fn nice_ceil(v: f64) -> f64 {
    if !(v > 0.0) {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&c| c >= v - 1e-12)
        .unwrap_or(10.0 * mag)
}

/// Coordinates are written with two decimals so output is stable.
fn n2(v: f64) -> String {
    format!("{v:.2}")
}

struct Bar {
    group: usize,
    slot: usize,
    metric: Metric,
    value: f64,
    series: usize,
}

/// Bar chart with one group per label and one bar per series. Ratio
/// metrics use the left `[0, 1]` axis; FPS uses a right axis. Missing
/// values are left out and listed under the legend.
fn bar_chart(title: &str, groups: &[String], series: &[(String, Metric)], value: impl Fn(usize, usize) -> Option<f64>) -> String {
    let per_group = series.len().max(1) as f64;
    let group_w = per_group * BAR_WIDTH + GROUP_GAP;
    let plot_w = (groups.len().max(1) as f64 * group_w).max(240.0);
    let width = MARGIN_LEFT + plot_w + MARGIN_RIGHT;
    let plot_h = SVG_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let base_y = MARGIN_TOP + plot_h;

    let mut bars = Vec::new();
    let mut missing = Vec::new();
    for (g, gname) in groups.iter().enumerate() {
        for (s, (sname, metric)) in series.iter().enumerate() {
            match value(g, s) {
                Some(v) if v.is_finite() => bars.push(Bar {
                    group: g,
                    slot: s,
                    metric: *metric,
                    value: v,
                    series: s,
                }),
                _ => missing.push(format!("{gname}: {sname}")),
            }
        }
    }
    let has_fps = series.iter().any(|(_, m)| *m == Metric::Fps);
    let fps_max = nice_ceil(
        bars.iter()
            .filter(|b| b.metric == Metric::Fps)
            .map(|b| b.value)
            .fold(0.0, f64::max),
    );
    let y_of = |m: Metric, v: f64| {
        let frac = if m == Metric::Fps { v / fps_max } else { v };
        base_y - frac.clamp(0.0, 1.0) * plot_h
    };

    let legend_rows = series.len() + missing.len() + usize::from(!missing.is_empty());
    let height = SVG_HEIGHT + legend_rows as f64 * LEGEND_LINE;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
        w = n2(width),
        h = n2(height)
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"28\" text-anchor=\"middle\" font-size=\"16\" {FONT}>{}</text>",
        n2(width / 2.0),
        esc(title)
    );

    // Left axis and grid.
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        let y = base_y - v * plot_h;
        let _ = writeln!(
            s,
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#dddddd\"/>",
            n2(MARGIN_LEFT),
            n2(MARGIN_LEFT + plot_w),
            y = n2(y)
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"11\" {FONT}>{}</text>",
            n2(MARGIN_LEFT - 6.0),
            n2(y + 4.0),
            fmt_fixed(v, 1)
        );
        if has_fps {
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"start\" font-size=\"11\" {FONT}>{}</text>",
                n2(MARGIN_LEFT + plot_w + 6.0),
                n2(y + 4.0),
                fmt_fixed(v * fps_max, 0)
            );
        }
    }
    let _ = writeln!(
        s,
        "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"{AXIS}\"/>",
        n2(MARGIN_TOP),
        n2(base_y),
        x = n2(MARGIN_LEFT)
    );
    let _ = writeln!(
        s,
        "<line x1=\"{}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{AXIS}\"/>",
        n2(MARGIN_LEFT),
        n2(MARGIN_LEFT + plot_w),
        y = n2(base_y)
    );
    if has_fps {
        let x = MARGIN_LEFT + plot_w;
        let _ = writeln!(
            s,
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"{AXIS}\"/>",
            n2(MARGIN_TOP),
            n2(base_y),
            x = n2(x)
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\" {FONT}>FPS</text>",
            n2(x + 30.0),
            n2(MARGIN_TOP - 10.0)
        );
    }

    for (g, gname) in groups.iter().enumerate() {
        let gx = MARGIN_LEFT + GROUP_GAP / 2.0 + g as f64 * group_w;
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" {FONT}>{}</text>",
            n2(gx + per_group * BAR_WIDTH / 2.0),
            n2(base_y + 18.0),
            esc(gname)
        );
    }
    for b in &bars {
        let x = MARGIN_LEFT + GROUP_GAP / 2.0 + b.group as f64 * group_w + b.slot as f64 * BAR_WIDTH;
        let y = y_of(b.metric, b.value);
        let _ = writeln!(
            s,
            "<rect class=\"bar\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>",
            n2(x + 2.0),
            n2(y),
            n2(BAR_WIDTH - 4.0),
            n2(base_y - y),
            PALETTE[b.series % PALETTE.len()]
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"9\" {FONT}>{}</text>",
            n2(x + BAR_WIDTH / 2.0),
            n2(y - 3.0),
            fmt_fixed(b.value, b.metric.decimals())
        );
    }

    let mut ly = SVG_HEIGHT - 20.0;
    for (i, (name, metric)) in series.iter().enumerate() {
        let axis = if *metric == Metric::Fps { " (right axis)" } else { "" };
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>",
            n2(MARGIN_LEFT),
            n2(ly - 9.0),
            PALETTE[i % PALETTE.len()]
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" {FONT}>{}{axis}</text>",
            n2(MARGIN_LEFT + 16.0),
            n2(ly),
            esc(name)
        );
        ly += LEGEND_LINE;
    }
    if !missing.is_empty() {
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" {FONT}>Not shown (no data):</text>",
            n2(MARGIN_LEFT),
            n2(ly)
        );
        for m in &missing {
            ly += LEGEND_LINE;
            let _ = writeln!(
                s,
                "<text class=\"omitted\" x=\"{}\" y=\"{}\" font-size=\"11\" {FONT}>{}</text>",
                n2(MARGIN_LEFT + 16.0),
                n2(ly),
                esc(m)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// One group per model, one bar per metric.
pub fn grouped_bars_svg(spec: &ReportSpec, metrics: &[Metric], title: &str) -> String {
    let groups: Vec<String> = spec.entries.iter().map(|e| e.model.clone()).collect();
    let series: Vec<(String, Metric)> = metrics.iter().map(|&m| (m.label().to_string(), m)).collect();
    bar_chart(title, &groups, &series, |g, s| spec.entries[g].metric(metrics[s]))
}

/// Per training dataset: `metric` on its own test set next to `metric` on
/// the adverse set. A row's own test set is the one with the same name.
/// `None` when no row has both.
pub fn paired_bars_svg(matrix: &CrossMatrix, adverse: &str, metric: Metric, title: &str) -> Option<String> {
    let rows: Vec<(String, f64, f64)> = matrix
        .models
        .iter()
        .filter_map(|m| {
            let own = matrix.get(m, m).and_then(|e| metric.of_eval(e))?;
            let adv = matrix.get(m, adverse).and_then(|e| metric.of_eval(e))?;
            Some((m.clone(), own, adv))
        })
        .collect();
    if rows.is_empty() {
        return None;
    }
    let groups: Vec<String> = rows.iter().map(|r| r.0.clone()).collect();
    let series = vec![
        (format!("{} (own test set)", metric.label()), metric),
        (format!("{} ({adverse})", metric.label()), metric),
    ];
    Some(bar_chart(title, &groups, &series, |g, s| Some(if s == 0 { rows[g].1 } else { rows[g].2 })))
}

fn write(dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<(), ReportError> {
    let path = dir.join(name);
    write_atomic(&path, text.as_bytes())?;
    written.push(path);
    Ok(())
}

/// Writes `tables/performance.{csv,txt}` and, when any entry has bench
/// stats, `tables/time.csv`, plus `figures/metrics.svg` under `root`.
pub fn emit_performance_table(spec: &ReportSpec, root: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let tables = root.join("tables");
    let mut written = Vec::new();
    write(&tables, "performance.csv", &performance_csv(spec), &mut written)?;
    write(&tables, "performance.txt", &performance_text(spec), &mut written)?;
    let bench: Vec<(String, BenchStats)> = spec
        .entries
        .iter()
        .filter_map(|e| e.bench.clone().map(|b| (e.model.clone(), b)))
        .collect();
    if let Some(req) = bench.first().map(|(_, b)| b.realtime_fps) {
        if let Ok(rows) = crate::bench::feasibility_report(&bench, req) {
            write(&tables, "time.csv", &crate::bench::feasibility_csv(&rows), &mut written)?;
        }
    }
    Ok(written)
}

/// Writes `figures/<name>.svg` under `root`.
pub fn emit_grouped_bars(spec: &ReportSpec, metrics: &[Metric], title: &str, root: &Path, name: &str) -> Result<PathBuf, ReportError> {
    let mut written = Vec::new();
    write(&root.join("figures"), &format!("{name}.svg"), &grouped_bars_svg(spec, metrics, title), &mut written)?;
    Ok(written.remove(0))
}

/// Writes `tables/ablation.{csv,txt}` and, when `adverse` is a column and
/// some row also has its own test set, `figures/adverse.svg`.
pub fn emit_ablation_matrix(matrix: &CrossMatrix, adverse: Option<&str>, root: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = Vec::new();
    let tables = root.join("tables");
    write(&tables, "ablation.csv", &ablation_csv(matrix), &mut written)?;
    write(&tables, "ablation.txt", &ablation_text(matrix), &mut written)?;
    if let Some(svg) = adverse.and_then(|a| paired_bars_svg(matrix, a, Metric::Map, &format!("mAP on own test set vs {a}"))) {
        write(&root.join("figures"), "adverse.svg", &svg, &mut written)?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> ReportSpec {
        let rows = [
            ("tiny-640", 0.684, 0.502, 0.237, 0.569, 6.8),
            ("full-640", 0.823, 0.649, 0.378, 0.748, 24.5),
            ("tiny-1280", 0.816, 0.756, 0.435, 0.836, 16.1),
            ("full-1280", 0.890, 0.841, 0.554, 0.908, 75.4),
        ];
        ReportSpec::new(
            rows.iter()
                .map(|&(m, p, r, map, map50, ms)| ReportEntry {
                    model: m.into(),
                    eval: Some(EvalResult::from_summary(p, r, map, map50)),
                    bench: Some(BenchStats::from_mean(ms, None, 15.0)),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(fmt_fixed(0.8645, 3), "0.865");
        assert_eq!(fmt_fixed(0.0005, 3), "0.001");
        assert_eq!(fmt_fixed(0.9995, 3), "1.000");
        assert_eq!(fmt_fixed(147.05882352941177, 1), "147.1");
        assert_eq!(fmt_fixed(13.262599469496021, 1), "13.3");
        assert_eq!(fmt_fixed(2.0, 3), "2.000");
        assert_eq!(fmt_fixed(-0.25, 1), "-0.3");
        assert_eq!(fmt_fixed(-0.0001, 2), "0.00");
        assert_eq!(fmt_fixed(999.96, 1), "1000.0");
        assert_eq!(fmt_fixed(1671.6, 0), "1672");
        assert_eq!(fmt_fixed(f64::NAN, 3), ABSENT);
    }

    #[test]
    fn performance_table_matches_fixture() {
        let csv = performance_csv(&fixture());
        assert_eq!(
            csv,
            "Model,F1,Precision,Recall,mAP,mAP@0.5\n\
             tiny-640,0.579,0.684,0.502,0.237,0.569\n\
             full-640,0.726,0.823,0.649,0.378,0.748\n\
             tiny-1280,0.785,0.816,0.756,0.435,0.836\n\
             full-1280,0.865,0.890,0.841,0.554,0.908\n"
        );
        assert_eq!(performance_csv(&ReportSpec::default()), "Model,F1,Precision,Recall,mAP,mAP@0.5\n");
    }

    #[test]
    fn duplicate_models_rejected() {
        let e = fixture().entries[0].clone();
        assert!(ReportSpec::new(vec![e.clone(), e]).is_err());
    }

    #[test]
    fn bars_cardinality_and_determinism() {
        let spec = fixture();
        let metrics = [Metric::Map, Metric::Map50, Metric::Fps];
        let a = grouped_bars_svg(&spec, &metrics, "Metrics");
        assert_eq!(a.matches("class=\"bar\"").count(), 12);
        assert_eq!(a, grouped_bars_svg(&spec, &metrics, "Metrics"));
        let one = ReportSpec::new(vec![spec.entries[0].clone()]).unwrap();
        assert_eq!(grouped_bars_svg(&one, &[Metric::Map], "x").matches("class=\"bar\"").count(), 1);
    }

    #[test]
    fn missing_metric_noted() {
        let mut spec = fixture();
        spec.entries[1].bench = None;
        let svg = grouped_bars_svg(&spec, &[Metric::Map, Metric::Fps], "x");
        assert_eq!(svg.matches("class=\"bar\"").count(), 7);
        assert!(svg.contains("full-640: FPS"));
    }

    #[test]
    fn best_balance_is_tiny_1280() {
        assert_eq!(best_balance(&fixture(), 15.0), Some("tiny-1280"));
        assert_eq!(best_balance(&fixture(), 1.0), Some("full-1280"));
    }

    #[test]
    fn ablation_absent_cells() {
        let m = CrossMatrix {
            models: vec!["boat".into(), "all".into()],
            test_sets: vec!["boat".into(), "adverse".into()],
            cells: vec![
                vec![Some(EvalResult::from_summary(0.8, 0.7, 0.5, 0.8)), None],
                vec![None, Some(EvalResult::from_summary(0.836, 0.816, 0.571, 0.886))],
            ],
        };
        let csv = ablation_csv(&m);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with("—,—,—,—,—"));
        assert!(lines[2].ends_with("0.826,0.836,0.816,0.571,0.886"));
        assert!(paired_bars_svg(&m, "adverse", Metric::Map, "x").is_none());
    }
}
