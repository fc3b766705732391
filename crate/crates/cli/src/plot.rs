//! Standalone SVG line charts of evaluation reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dppo::algo::EvalRow;

use crate::args::PlotArgs;
use crate::error::{read_input, CliError, CliResult};

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 360.0;
/// Series colors, assigned to reports in command-line order.
pub const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

const LEFT: f64 = 64.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;

/// One line: `(x, y, optional 95% half-width)` points.
#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub color: &'static str,
    pub points: Vec<(f64, f64, Option<f64>)>,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn span(lo: f64, hi: f64, pad: f64) -> (f64, f64) {
    if (hi - lo).abs() < 1e-12 {
        (lo - pad, hi + pad)
    } else {
        let m = (hi - lo) * 0.05;
        (lo - m, hi + m)
    }
}

/// Renders an SVG 1.1 document. Bands are drawn only for series whose
/// every point has an interval.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y, ci) in all {
        let c = ci.unwrap_or(0.0);
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y - c);
        y1 = y1.max(y + c);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (x0, x1) = span(x0, x1, 0.5);
    let (y0, y1) = span(y0, y1, 1.0);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    // axes, ticks and grid
    let _ = writeln!(
        svg,
        r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444" stroke-width="1"/>"##
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            svg,
            r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="#ddd" stroke-width="0.5"/>"##,
            TOP + ph
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#ddd" stroke-width="0.5"/>"##,
            LEFT + pw
        );
        let _ = writeln!(
            svg,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="11">{xv:.2}</text>"#,
            TOP + ph + 16.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="11">{yv:.2}</text>"#,
            LEFT - 6.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(y_label)
    );

    for s in series {
        let mut pts = s.points.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pts.len() > 1 && pts.iter().all(|p| p.2.is_some()) {
            let upper = pts.iter().map(|&(x, y, c)| (x, y + c.unwrap_or(0.0)));
            let lower = pts.iter().rev().map(|&(x, y, c)| (x, y - c.unwrap_or(0.0)));
            let poly: Vec<String> = upper
                .chain(lower)
                .map(|(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polygon class="ci-band" points="{}" fill="{}" fill-opacity="0.18" stroke="none"/>"#,
                poly.join(" "),
                s.color
            );
        }
        let line: Vec<String> = pts.iter().map(|&(x, y, _)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            line.join(" "),
            s.color
        );
        for &(x, y, _) in &pts {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                sx(x),
                sy(y),
                s.color
            );
        }
    }
    for (i, s) in series.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * i as f64;
        let x = LEFT + pw - 150.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-width="2"/>"#,
            y - 4.0,
            x + 18.0,
            y - 4.0,
            s.color
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{y:.2}" font-family="sans-serif" font-size="11">{}</text>"#,
            x + 24.0,
            escape(&s.name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// The three charts written by `plot`: file name, title, y label and the
/// value/interval accessor.
type Metric = (&'static str, &'static str, &'static str, fn(&EvalRow) -> (f64, Option<f64>));

pub const CHARTS: [Metric; 3] = [
    ("return.svg", "Average undiscounted return", "return", |r| (r.mean_return, r.return_ci95)),
    (
        "early_termination.svg",
        "Early-termination fraction",
        "fraction of episodes",
        |r| (r.early_termination_fraction, r.early_termination_ci95),
    ),
    ("tracking_error.svg", "Tracking error", "progress-rate shortfall", |r| {
        (r.tracking_error, r.tracking_error_ci95)
    }),
];

pub fn load_report(path: &Path) -> CliResult<Vec<EvalRow>> {
    let text = read_input(&path.to_path_buf())?;
    let rows: Vec<EvalRow> = serde_json::from_str(&text).map_err(|e| CliError::input(path, e))?;
    if rows.is_empty() {
        return Err(CliError::input(path, "report has an empty beta grid"));
    }
    Ok(rows)
}

pub fn run(args: &PlotArgs) -> CliResult<()> {
    let reports = args
        .reports
        .iter()
        .map(|p| Ok((p, load_report(p)?)))
        .collect::<CliResult<Vec<_>>>()?;
    fs::create_dir_all(&args.out).map_err(|e| CliError::output(&args.out, e))?;
    for (file, title, y_label, get) in CHARTS {
        let series: Vec<Series> = reports
            .iter()
            .enumerate()
            .map(|(i, (path, rows))| Series {
                name: path
                    .file_stem()
                    .map_or_else(|| format!("report {i}"), |s| s.to_string_lossy().into_owned()),
                color: PALETTE[i % PALETTE.len()],
                points: rows
                    .iter()
                    .map(|r| {
                        let (y, ci) = get(r);
                        (r.beta, y, ci)
                    })
                    .collect(),
            })
            .collect();
        let path = args.out.join(file);
        fs::write(&path, line_chart(title, "risk parameter β", y_label, &series))
            .map_err(|e| CliError::output(&path, e))?;
    }
    Ok(())
}
