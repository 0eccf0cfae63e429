//! Accuracy charts as standalone SVG: one line per series with a
//! one-standard-deviation band, rounds on x, accuracy on a fixed `[0, 1]` y axis.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};
use crate::output::{RunMeta, AGGREGATE_HEADER, CLASSICAL_BASELINE, QUANTUM_BASELINE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Train,
    Test,
}

impl Metric {
    fn as_str(self) -> &'static str {
        match self {
            Metric::Train => "train",
            Metric::Test => "test",
        }
    }
}

/// One curve: `(round, mean, std)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(usize, f64, f64)>,
}

/// Series of every chart group, read back from run directories.
#[derive(Debug, Clone, Default)]
pub struct ChartGroup {
    pub train: Vec<Series>,
    pub test: Vec<Series>,
}

fn parse_aggregate(path: &Path) -> Result<Vec<(String, Vec<(usize, [f64; 6])>)>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    if lines.next() != Some(AGGREGATE_HEADER) {
        return Err(CliError::Runtime(format!("{}: unexpected header", path.display())));
    }
    let mut out: Vec<(String, Vec<(usize, [f64; 6])>)> = Vec::new();
    for (n, line) in lines.enumerate() {
        let bad = || CliError::Runtime(format!("{}: malformed line {}", path.display(), n + 2));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(bad());
        }
        let round: usize = cols[0].parse().map_err(|_| bad())?;
        let mut vals = [0.0; 6];
        for (v, c) in vals.iter_mut().zip(&cols[2..]) {
            *v = c.parse().map_err(|_| bad())?;
        }
        match out.iter_mut().find(|(s, _)| s == cols[1]) {
            Some((_, pts)) => pts.push((round, vals)),
            None => out.push((cols[1].to_string(), vec![(round, vals)])),
        }
    }
    Ok(out)
}

/// Run directories directly under `out_dir` that contain `meta.json` and
/// `aggregate.csv`, grouped by chart name. Runs are visited in name order;
/// baseline series are taken from the first run of a group that has them.
pub fn collect_groups(out_dir: &Path) -> Result<BTreeMap<String, ChartGroup>> {
    let entries = fs::read_dir(out_dir).map_err(|e| CliError::Runtime(format!("{}: {e}", out_dir.display())))?;
    let mut runs: Vec<(RunMeta, PathBuf)> = Vec::new();
    for entry in entries {
        let dir = entry.map_err(|e| CliError::Runtime(e.to_string()))?.path();
        let (meta_path, agg_path) = (dir.join("meta.json"), dir.join("aggregate.csv"));
        if !(meta_path.is_file() && agg_path.is_file()) {
            continue;
        }
        let text = fs::read_to_string(&meta_path).map_err(|e| CliError::Runtime(format!("{}: {e}", meta_path.display())))?;
        let meta: RunMeta = serde_json::from_str(&text)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", meta_path.display())))?;
        runs.push((meta, agg_path));
    }
    runs.sort_by(|a, b| a.0.name.cmp(&b.0.name));

    let mut groups: BTreeMap<String, ChartGroup> = BTreeMap::new();
    for (meta, agg_path) in runs {
        let group = groups.entry(meta.chart.clone()).or_default();
        for (label, pts) in parse_aggregate(&agg_path)? {
            let is_baseline = label == QUANTUM_BASELINE || label == CLASSICAL_BASELINE;
            if is_baseline && group.train.iter().any(|s| s.label == label) {
                continue;
            }
            group.train.push(Series {
                label: label.clone(),
                points: pts.iter().map(|(r, v)| (*r, v[2], v[3])).collect(),
            });
            group.test.push(Series {
                label,
                points: pts.iter().map(|(r, v)| (*r, v[4], v[5])).collect(),
            });
        }
    }
    Ok(groups)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_chart(title: &str, series: &[Series]) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(CliError::Runtime(format!("chart `{title}` has no series to draw")));
    }
    let max_round = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .max()
        .unwrap_or(1)
        .max(2);
    let min_round = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0))
        .min()
        .unwrap_or(1)
        .min(max_round - 1);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x = |r: usize| LEFT + plot_w * (r - min_round) as f64 / (max_round - min_round) as f64;
    let y = |v: f64| TOP + plot_h * (1.0 - v.clamp(0.0, 1.0));

    let mut svg = String::new();
    let w = &mut svg;
    writeln!(w, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(w, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + plot_w / 2.0, escape(title)).unwrap();
    for i in 0..=5 {
        let v = i as f64 / 5.0;
        writeln!(w, r##"<line x1="{LEFT}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#dddddd"/>"##, y(v), LEFT + plot_w).unwrap();
        writeln!(w, r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.1}</text>"#, LEFT - 6.0, y(v) + 4.0).unwrap();
    }
    let step = ((max_round - min_round) / 10).max(1);
    let mut r = min_round;
    while r <= max_round {
        writeln!(w, r#"<text x="{:.2}" y="{}" text-anchor="middle">{r}</text>"#, x(r), TOP + plot_h + 16.0).unwrap();
        r += step;
    }
    writeln!(w, r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#).unwrap();
    writeln!(w, r#"<text x="{}" y="{}" text-anchor="middle">round</text>"#, LEFT + plot_w / 2.0, HEIGHT - 12.0).unwrap();
    writeln!(w, r#"<text transform="translate(16 {}) rotate(-90)" text-anchor="middle">accuracy</text>"#, TOP + plot_h / 2.0).unwrap();

    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if s.points.is_empty() {
            continue;
        }
        let upper = s.points.iter().map(|&(r, m, sd)| format!("{:.2},{:.2}", x(r), y(m + sd)));
        let lower = s.points.iter().rev().map(|&(r, m, sd)| format!("{:.2},{:.2}", x(r), y(m - sd)));
        let band: Vec<String> = upper.chain(lower).collect();
        writeln!(w, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, band.join(" ")).unwrap();
        let line: Vec<String> = s.points.iter().map(|&(r, m, _)| format!("{:.2},{:.2}", x(r), y(m))).collect();
        writeln!(w, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, line.join(" ")).unwrap();
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 14.0;
        writeln!(w, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0).unwrap();
        writeln!(w, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&s.label)).unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Writes `<chart>-train.svg` and `<chart>-test.svg` for every group found under `out_dir`.
pub fn emit_plots(out_dir: &Path) -> Result<Vec<PathBuf>> {
    let groups = collect_groups(out_dir)?;
    if groups.is_empty() {
        return Err(CliError::Runtime(format!(
            "no run directories with aggregate.csv under {}",
            out_dir.display()
        )));
    }
    let mut written = Vec::new();
    for (chart, group) in &groups {
        for (metric, series) in [(Metric::Train, &group.train), (Metric::Test, &group.test)] {
            let title = format!("{chart}: {} accuracy", metric.as_str());
            let svg = render_chart(&title, series)?;
            let path = out_dir.join(format!("{chart}-{}.svg", metric.as_str()));
            fs::write(&path, svg).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            written.push(path);
        }
    }
    Ok(written)
}
