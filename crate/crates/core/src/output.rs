//! Artifact writers: CSV with round-trip precision, pretty JSON and minimal SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::phase_space::HusimiField;

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| fmt_f64(x)))?;
    }
    w.flush()
}

pub fn write_json(path: &Path, value: &impl Serialize) -> io::Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)
}

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555"];
const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 56.0;

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-300 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" font-family="sans-serif" font-size="15" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
}

fn axes(out: &mut String, xr: (f64, f64), yr: (f64, f64), xlabel: &str, ylabel: &str) {
    let (x0, y0, x1, y1) = (MARGIN, H - MARGIN, W - 20.0, 36.0);
    let _ = writeln!(out, r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);
    let small = r#"font-family="sans-serif" font-size="11""#;
    let _ = writeln!(out, r#"<text x="{x0}" y="{}" {small}>{:.3}</text>"#, y0 + 14.0, xr.0);
    let _ = writeln!(out, r#"<text x="{x1}" y="{}" {small} text-anchor="end">{:.3}</text>"#, y0 + 14.0, xr.1);
    let _ = writeln!(out, r#"<text x="{}" y="{y0}" {small} text-anchor="end">{:.3e}</text>"#, x0 - 4.0, yr.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" {small} text-anchor="end">{:.3e}</text>"#, x0 - 4.0, y1 + 10.0, yr.1);
    let _ = writeln!(out, r#"<text x="{}" y="{}" {small} text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 16.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" {small} text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Polylines on shared axes; long series are thinned to at most 2000 vertices.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series<'_>]) -> String {
    let xr = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let yr = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| MARGIN + (x - xr.0) / (xr.1 - xr.0) * (W - 20.0 - MARGIN);
    let sy = |y: f64| H - MARGIN - (y - yr.0) / (yr.1 - yr.0) * (H - MARGIN - 36.0);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, xr, yr, xlabel, ylabel);
    for (k, s) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let stride = s.points.len().div_ceil(2000).max(1);
        let pts: Vec<String> = s
            .points
            .iter()
            .step_by(stride)
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" fill="{color}">{}</text>"#,
            W - 150.0,
            50.0 + 14.0 * k as f64,
            escape(s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Grey-scale heat map of the Husimi density, block-averaged down to at most 100 x 100 cells.
pub fn heat_map(title: &str, field: &HusimiField) -> String {
    let g = &field.grid;
    let bp = g.n_p.div_ceil(100);
    let bq = g.n_q.div_ceil(100);
    let (np, nq) = (g.n_p.div_ceil(bp), g.n_q.div_ceil(bq));
    let mut cells = vec![0.0; np * nq];
    for i in 0..np {
        for j in 0..nq {
            let (mut s, mut c) = (0.0, 0usize);
            for ii in i * bp..((i + 1) * bp).min(g.n_p) {
                for jj in j * bq..((j + 1) * bq).min(g.n_q) {
                    s += field.at(ii, jj);
                    c += 1;
                }
            }
            cells[i * nq + j] = s / c as f64;
        }
    }
    let top = cells.iter().copied().fold(0.0, f64::max).max(1e-300);
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, (g.q_min, g.q_max), (g.p_min, g.p_max), "q", "p");
    let cw = (W - 20.0 - MARGIN) / nq as f64;
    let ch = (H - MARGIN - 36.0) / np as f64;
    for i in 0..np {
        for j in 0..nq {
            let v = cells[i * nq + j] / top;
            if v < 1e-3 {
                continue;
            }
            let shade = (255.0 * (1.0 - v)).round() as u8;
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="rgb({shade},{shade},{shade})"/>"#,
                MARGIN + j as f64 * cw,
                H - MARGIN - (i + 1) as f64 * ch,
                cw + 0.05,
                ch + 0.05
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
