//! SVG plot emission for run artifacts.
//!
//! Charts are written as plain SVG text so no rendering dependency is
//! needed. All inputs are read and validated before the first output file
//! is created, so a bad run directory never leaves partial plots behind.

use std::fs;
use std::path::{Path, PathBuf};

use crate::agent::IterationRow;
use crate::error::{GacError, Result};
use crate::harness::metrics::read_metrics;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 34.0;
const MARGIN_BOTTOM: f64 = 46.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// All metrics series of one run directory: one entry per seed.
#[derive(Debug)]
pub struct RunCurves {
    pub label: String,
    pub series: Vec<Vec<IterationRow>>,
}

/// Reads every metrics file of a run directory. The directory either holds
/// `metrics.csv` directly or per-seed `seed_<n>/metrics.csv` subdirectories.
/// A file with no data rows is an error, reported before anything is written.
pub fn collect_run(dir: &Path) -> Result<RunCurves> {
    let label = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    let mut paths = Vec::new();
    let direct = dir.join("metrics.csv");
    if direct.is_file() {
        paths.push(direct);
    }
    let mut seeds: Vec<(u64, PathBuf)> = Vec::new();
    if dir.is_dir() {
        for entry in fs::read_dir(dir).map_err(|e| GacError::io(dir.to_path_buf(), e))? {
            let entry = entry.map_err(|e| GacError::io(dir.to_path_buf(), e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(n) = name.strip_prefix("seed_").and_then(|s| s.parse::<u64>().ok()) {
                let path = entry.path().join("metrics.csv");
                if path.is_file() {
                    seeds.push((n, path));
                }
            }
        }
    }
    seeds.sort_by_key(|(n, _)| *n);
    paths.extend(seeds.into_iter().map(|(_, p)| p));
    if paths.is_empty() {
        return Err(GacError::Metrics(format!("{}: no metrics.csv found", dir.display())));
    }
    let mut series = Vec::with_capacity(paths.len());
    for path in paths {
        let rows = read_metrics(&path)?;
        if rows.is_empty() {
            return Err(GacError::Metrics(format!("{}: no data rows to plot", path.display())));
        }
        series.push(rows);
    }
    Ok(RunCurves { label, series })
}

/// One drawable curve: a mean line with an optional min..max band.
struct Curve {
    label: String,
    color: &'static str,
    mean: Vec<(f64, f64)>,
    band: Option<(Vec<(f64, f64)>, Vec<(f64, f64)>)>,
}

fn extract(runs: &[RunCurves], field: fn(&IterationRow) -> f64, with_band: bool) -> Vec<Curve> {
    let mut curves = Vec::with_capacity(runs.len());
    for (i, run) in runs.iter().enumerate() {
        let len = run.series.iter().map(Vec::len).min().unwrap_or(0);
        let mut mean = Vec::with_capacity(len);
        let mut upper = Vec::with_capacity(len);
        let mut lower = Vec::with_capacity(len);
        for row in 0..len {
            let x = run.series[0][row].env_steps as f64;
            let values: Vec<f64> = run.series.iter().map(|s| field(&s[row])).collect();
            let m = values.iter().sum::<f64>() / values.len() as f64;
            mean.push((x, m));
            upper.push((x, values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)));
            lower.push((x, values.iter().cloned().fold(f64::INFINITY, f64::min)));
        }
        let band = (with_band && run.series.len() > 1).then_some((upper, lower));
        curves.push(Curve {
            label: run.label.clone(),
            color: PALETTE[i % PALETTE.len()],
            mean,
            band,
        });
    }
    curves
}

/// Rounds to four significant digits for tick labels.
fn tick_label(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = 10f64.powi(3 - v.abs().log10().floor() as i32);
    format!("{}", (v * mag).round() / mag)
}

fn push_points(out: &mut String, points: &[(f64, f64)], to_px: impl Fn(f64, f64) -> (f64, f64)) {
    for (i, &(x, y)) in points.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let (px, py) = to_px(x, y);
        out.push_str(&format!("{px:.2},{py:.2}"));
    }
}

fn line_chart(title: &str, y_label: &str, curves: &[Curve]) -> String {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for c in curves {
        for &(x, y) in &c.mean {
            xs.push(x);
            ys.push(y);
        }
        if let Some((upper, lower)) = &c.band {
            ys.extend(upper.iter().chain(lower).map(|&(_, y)| y));
        }
    }
    let (mut x0, mut x1) = bounds(&xs);
    let (mut y0, mut y1) = bounds(&ys);
    if x1 == x0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let pad = 0.05 * (y1 - y0);
    if pad > 0.0 {
        y0 -= pad;
        y1 += pad;
    } else {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let to_px = |x: f64, y: f64| {
        (
            MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w,
            MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h,
        )
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">{title}</text>\n",
        WIDTH / 2.0
    ));
    // Axes with five ticks per side.
    let (ax0, ay0) = (MARGIN_LEFT, MARGIN_TOP + plot_h);
    svg.push_str(&format!(
        "<line x1=\"{ax0}\" y1=\"{ay0}\" x2=\"{}\" y2=\"{ay0}\" stroke=\"#333\"/>\n",
        MARGIN_LEFT + plot_w
    ));
    svg.push_str(&format!(
        "<line x1=\"{ax0}\" y1=\"{ay0}\" x2=\"{ax0}\" y2=\"{MARGIN_TOP}\" stroke=\"#333\"/>\n"
    ));
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let (px, _) = to_px(xv, y0);
        let (_, py) = to_px(x0, yv);
        svg.push_str(&format!(
            "<line x1=\"{px:.2}\" y1=\"{ay0}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#333\"/>\n",
            ay0 + 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>\n",
            ay0 + 18.0,
            tick_label(xv)
        ));
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{ax0}\" y2=\"{py:.2}\" stroke=\"#333\"/>\n",
            ax0 - 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\n",
            ax0 - 8.0,
            py + 4.0,
            tick_label(yv)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">env_steps</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 8.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    ));

    for curve in curves {
        if let Some((upper, lower)) = &curve.band {
            let mut points = String::new();
            push_points(&mut points, upper, to_px);
            let reversed: Vec<(f64, f64)> = lower.iter().rev().cloned().collect();
            points.push(' ');
            push_points(&mut points, &reversed, to_px);
            svg.push_str(&format!(
                "<polygon points=\"{points}\" fill=\"{}\" fill-opacity=\"0.15\" stroke=\"none\"/>\n",
                curve.color
            ));
        }
        let mut points = String::new();
        push_points(&mut points, &curve.mean, to_px);
        svg.push_str(&format!(
            "<polyline points=\"{points}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
            curve.color
        ));
    }
    for (i, curve) in curves.iter().enumerate() {
        let y = MARGIN_TOP + 14.0 * i as f64 + 10.0;
        let x = MARGIN_LEFT + plot_w - 150.0;
        svg.push_str(&format!(
            "<rect x=\"{x}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n",
            y - 9.0,
            curve.color
        ));
        svg.push_str(&format!("<text x=\"{}\" y=\"{y}\">{}</text>\n", x + 14.0, curve.label));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Renders the four standard charts for the given runs and writes them into
/// `out_dir` (created if needed). Returns the written paths. Rendering
/// happens fully in memory before the first write.
pub fn write_plots(runs: &[RunCurves], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if runs.is_empty() {
        return Err(GacError::Metrics("nothing to plot: no run directories given".into()));
    }
    let charts: [(&str, String); 4] = [
        (
            "returns.svg",
            line_chart(
                "evaluation return vs environment steps",
                "eval_return_mean",
                &extract(runs, |r| r.eval_return_mean, true),
            ),
        ),
        ("mmd.svg", line_chart("action-set spread vs environment steps", "mmd_value", &extract(runs, |r| r.mmd_value, false))),
        ("alpha.svg", line_chart("entropy weight vs environment steps", "alpha", &extract(runs, |r| r.alpha, false))),
        ("beta.svg", line_chart("spread target vs environment steps", "beta", &extract(runs, |r| r.beta, false))),
    ];
    fs::create_dir_all(out_dir).map_err(|e| GacError::io(out_dir.to_path_buf(), e))?;
    let mut written = Vec::with_capacity(charts.len());
    for (name, svg) in charts {
        let path = out_dir.join(name);
        fs::write(&path, svg).map_err(|e| GacError::io(path.clone(), e))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes an action dump: a header naming the dimensions, then one
/// comma-separated action per line.
pub fn write_actions(path: &Path, actions: &[Vec<f64>]) -> Result<()> {
    let dim = actions.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(GacError::InvalidArgument("action dump needs at least one action".into()));
    }
    let mut text = (0..dim).map(|i| format!("a{i}")).collect::<Vec<_>>().join(",");
    text.push('\n');
    for a in actions {
        let row = a.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        text.push_str(&row);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| GacError::io(path.to_path_buf(), e))
}

/// Reads an action dump written by `write_actions`.
pub fn read_actions(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| GacError::io(path.to_path_buf(), e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| GacError::Metrics(format!("{}: empty action dump", path.display())))?;
    let dim = header.split(',').count();
    let mut actions = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(dim);
        for field in line.split(',') {
            row.push(field.parse::<f64>().map_err(|_| {
                GacError::Metrics(format!("{}: line {}: bad value {field:?}", path.display(), i + 2))
            })?);
        }
        if row.len() != dim {
            return Err(GacError::Metrics(format!(
                "{}: line {}: {} fields, header names {dim}",
                path.display(),
                i + 2,
                row.len()
            )));
        }
        actions.push(row);
    }
    if actions.is_empty() {
        return Err(GacError::Metrics(format!("{}: no actions to plot", path.display())));
    }
    Ok(actions)
}

/// Merges every action dump found under a run directory (`actions.csv`
/// directly or in `seed_<n>/` subdirectories). `None` when the run has no
/// dumps; malformed dumps are errors.
pub fn collect_actions(dir: &Path) -> Result<Option<Vec<Vec<f64>>>> {
    let mut paths = Vec::new();
    let direct = dir.join("actions.csv");
    if direct.is_file() {
        paths.push(direct);
    }
    let mut seeds: Vec<(u64, PathBuf)> = Vec::new();
    if dir.is_dir() {
        for entry in fs::read_dir(dir).map_err(|e| GacError::io(dir.to_path_buf(), e))? {
            let entry = entry.map_err(|e| GacError::io(dir.to_path_buf(), e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(n) = name.strip_prefix("seed_").and_then(|s| s.parse::<u64>().ok()) {
                let path = entry.path().join("actions.csv");
                if path.is_file() {
                    seeds.push((n, path));
                }
            }
        }
    }
    seeds.sort_by_key(|(n, _)| *n);
    paths.extend(seeds.into_iter().map(|(_, p)| p));
    if paths.is_empty() {
        return Ok(None);
    }
    let mut merged = Vec::new();
    for path in paths {
        merged.extend(read_actions(&path)?);
    }
    Ok(Some(merged))
}

/// Scatter of sampled actions, one circle element per action. Two or more
/// dimensions scatter the first two against each other; one-dimensional
/// actions are spread along the sample index so modes show as bands.
pub fn action_scatter(title: &str, actions: &[Vec<f64>]) -> Result<String> {
    if actions.is_empty() {
        return Err(GacError::InvalidArgument("action scatter needs at least one action".into()));
    }
    let dim = actions[0].len();
    let (points, x_label, y_label): (Vec<(f64, f64)>, &str, &str) = if dim >= 2 {
        (actions.iter().map(|a| (a[0], a[1])).collect(), "a0", "a1")
    } else {
        (
            actions.iter().enumerate().map(|(i, a)| (i as f64, a[0])).collect(),
            "sample",
            "a0",
        )
    };
    let (mut x0, mut x1) = bounds(&points.iter().map(|p| p.0).collect::<Vec<_>>());
    let (mut y0, mut y1) = bounds(&points.iter().map(|p| p.1).collect::<Vec<_>>());
    if x1 == x0 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if y1 == y0 {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">{title}</text>\n",
        WIDTH / 2.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{x_label}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 8.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{y_label}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    ));
    for &(x, y) in &points {
        let px = MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
        let py = MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h;
        svg.push_str(&format!(
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"2\" fill=\"#1f77b4\" fill-opacity=\"0.5\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() && hi.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}
