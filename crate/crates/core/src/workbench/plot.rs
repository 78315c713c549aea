use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::bench::{load_records, median, relative_to, BenchRecord, SolverKind};
use super::WorkbenchError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 70.0;

/// One box of a box plot.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGroup {
    pub label: String,
    pub values: Vec<f64>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders a box plot with every data point overlaid as a circle.
///
/// Output is a pure function of the input. The plot area is tagged with
/// `data-ymin`/`data-ymax` and each point carries its value in `data-value`.
pub fn render_box_plot(title: &str, y_label: &str, groups: &[BoxGroup]) -> String {
    let all: Vec<f64> = groups.iter().flat_map(|g| g.values.iter().copied()).filter(|v| v.is_finite()).collect();
    let (mut lo, mut hi) = all
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if all.is_empty() {
        (lo, hi) = (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
    lo -= pad;
    hi += pad;

    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let y = |v: f64| TOP + plot_h * (hi - v) / (hi - lo);
    let slot = plot_w / groups.len().max(1) as f64;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect class="plot-area" x="{LEFT:.2}" y="{TOP:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="black" data-ymin="{lo}" data-ymax="{hi}"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" transform="rotate(-90 16 {:.2})" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(y_label)
    );
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="10">{:.3}</text>"#,
            LEFT - 6.0,
            y(v) + 3.0,
            v
        );
    }

    for (gi, g) in groups.iter().enumerate() {
        let cx = LEFT + slot * (gi as f64 + 0.5);
        let half = (slot * 0.25).min(40.0);
        let mut sorted: Vec<f64> = g.values.iter().copied().filter(|v| v.is_finite()).collect();
        sorted.sort_by(f64::total_cmp);
        let _ = writeln!(
            svg,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
            HEIGHT - BOTTOM + 18.0,
            escape(&g.label)
        );
        if sorted.is_empty() {
            continue;
        }
        let (q1, q2, q3) = (quantile(&sorted, 0.25), quantile(&sorted, 0.5), quantile(&sorted, 0.75));
        let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
        let _ = writeln!(
            svg,
            r#"<line class="whisker" x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            y(max),
            y(min)
        );
        let _ = writeln!(
            svg,
            r##"<rect class="box" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#cfe0f3" stroke="black"/>"##,
            cx - half,
            y(q3),
            2.0 * half,
            y(q1) - y(q3)
        );
        let _ = writeln!(
            svg,
            r#"<line class="median" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="2"/>"#,
            cx - half,
            y(q2),
            cx + half,
            y(q2)
        );
        for (pi, &v) in sorted.iter().enumerate() {
            // small deterministic horizontal jitter keeps points apart
            let dx = ((pi % 7) as f64 - 3.0) * half / 6.0;
            let _ = writeln!(
                svg,
                r##"<circle class="point" cx="{:.2}" cy="{:.2}" r="2.5" fill="#d62728" fill-opacity="0.6" data-value="{v}"/>"##,
                cx + dx,
                y(v)
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn group_label(r: &BenchRecord) -> String {
    format!("l{} n{} m{} {}", r.l, r.n, r.m, r.solver.as_str())
}

fn grouped<F: Fn(&BenchRecord) -> Option<f64>>(records: &[BenchRecord], value: F) -> Vec<BoxGroup> {
    let mut map: BTreeMap<(usize, usize, usize, SolverKind), BoxGroup> = BTreeMap::new();
    for r in records {
        let Some(v) = value(r) else { continue };
        map.entry((r.l, r.n, r.m, r.solver))
            .or_insert_with(|| BoxGroup {
                label: group_label(r),
                values: Vec::new(),
            })
            .values
            .push(v);
    }
    map.into_values().collect()
}

/// Writes `makespan.svg`, `log_time.svg` and, when exact runs are present,
/// `relative_cost.svg` into `out_dir`. Returns the written paths.
pub fn emit_plots(csv_path: &Path, out_dir: &Path) -> Result<Vec<PathBuf>, WorkbenchError> {
    let records = load_records(csv_path)?;
    if records.is_empty() {
        return Err(WorkbenchError::NoData);
    }
    fs::create_dir_all(out_dir).map_err(|e| WorkbenchError::io(out_dir, e))?;
    let mut plots = vec![
        (
            "makespan.svg",
            render_box_plot("Makespan", "makespan", &grouped(&records, |r| r.makespan)),
        ),
        (
            "log_time.svg",
            render_box_plot(
                "Wall-clock solving time",
                "log10(wall ms)",
                &grouped(&records, |r| Some(r.wall_ms.max(1e-6).log10())),
            ),
        ),
    ];
    let rel = relative_to(&records, SolverKind::Exact);
    let mut rel_groups: BTreeMap<(usize, usize, usize, SolverKind), BoxGroup> = BTreeMap::new();
    for r in rel.iter().filter(|r| r.solver != SolverKind::Exact) {
        rel_groups
            .entry((r.l, r.n, r.m, r.solver))
            .or_insert_with(|| BoxGroup {
                label: format!("l{} n{} m{} {}", r.l, r.n, r.m, r.solver.as_str()),
                values: Vec::new(),
            })
            .values
            .push(r.relative_cost);
    }
    if !rel_groups.is_empty() {
        let groups: Vec<BoxGroup> = rel_groups.into_values().collect();
        let medians: Vec<String> = groups
            .iter()
            .map(|g| format!("{:.3}", median(&g.values).unwrap_or(f64::NAN)))
            .collect();
        plots.push((
            "relative_cost.svg",
            render_box_plot(
                &format!("Relative cost vs exact (medians {})", medians.join(", ")),
                "cost / exact cost",
                &groups,
            ),
        ));
    }
    let mut written = Vec::new();
    for (name, svg) in plots {
        let path = out_dir.join(name);
        fs::write(&path, svg).map_err(|e| WorkbenchError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
