//! Minimal SVG line plots from parsed CSV tables: the first column is the
//! x axis and every remaining numeric column becomes one polyline series.
//! Output is deterministic for a given input.

use std::fmt::Write as _;

use anyhow::{bail, Result};

use crate::records::CsvTable;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
];

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
}

fn parse_cell(raw: &str) -> Option<f64> {
    let v: f64 = raw.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

/// Extract (x, y) series: column 0 is x, every other column that parses as
/// finite numbers contributes one series; non-numeric cells are skipped.
fn extract_series(table: &CsvTable) -> Result<Vec<Series>> {
    if table.columns.is_empty() {
        bail!("table has no columns");
    }
    let mut series = Vec::new();
    for (j, name) in table.columns.iter().enumerate().skip(1) {
        let mut points = Vec::new();
        for row in &table.rows {
            if let (Some(x), Some(y)) = (parse_cell(&row[0]), parse_cell(&row[j])) {
                points.push((x, y));
            }
        }
        if !points.is_empty() {
            series.push(Series {
                name: name.clone(),
                points,
            });
        }
    }
    Ok(series)
}

fn bounds(series: &[Series]) -> (f64, f64, f64, f64) {
    let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for s in series {
        for &(x, y) in &s.points {
            b.0 = b.0.min(x);
            b.1 = b.1.max(x);
            b.2 = b.2.min(y);
            b.3 = b.3.max(y);
        }
    }
    // Degenerate ranges (single point, constant series) get unit padding.
    if !b.0.is_finite() {
        b = (0.0, 1.0, 0.0, 1.0);
    }
    if b.1 - b.0 < 1e-300 {
        b.0 -= 0.5;
        b.1 += 0.5;
    }
    if b.3 - b.2 < 1e-300 {
        b.2 -= 0.5;
        b.3 += 0.5;
    }
    b
}

/// Render the table as an SVG document string.
pub fn render_svg(table: &CsvTable, title: &str) -> Result<String> {
    let series = extract_series(table)?;
    let (x0, x1, y0, y1) = bounds(&series);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )?;
    writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#)?;
    writeln!(
        out,
        r#"<text x="{:.1}" y="30" font-family="monospace" font-size="16" text-anchor="middle">{title}</text>"#,
        WIDTH / 2.0
    )?;
    // Axes.
    writeln!(
        out,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    )?;
    writeln!(
        out,
        r#"<line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN
    )?;
    // Axis extent labels.
    writeln!(
        out,
        r#"<text x="{m}" y="{y}" font-family="monospace" font-size="11">{x0:.3e}</text>"#,
        m = MARGIN,
        y = HEIGHT - MARGIN + 18.0
    )?;
    writeln!(
        out,
        r#"<text x="{r}" y="{y}" font-family="monospace" font-size="11" text-anchor="end">{x1:.3e}</text>"#,
        r = WIDTH - MARGIN,
        y = HEIGHT - MARGIN + 18.0
    )?;
    writeln!(
        out,
        r#"<text x="{x}" y="{b}" font-family="monospace" font-size="11" text-anchor="end">{y0:.3e}</text>"#,
        x = MARGIN - 6.0,
        b = HEIGHT - MARGIN
    )?;
    writeln!(
        out,
        r#"<text x="{x}" y="{t}" font-family="monospace" font-size="11" text-anchor="end">{y1:.3e}</text>"#,
        x = MARGIN - 6.0,
        t = MARGIN + 10.0
    )?;

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.join(" ")
        )?;
        writeln!(
            out,
            r#"<text x="{x}" y="{y}" font-family="monospace" font-size="12" fill="{color}">{}</text>"#,
            s.name,
            x = WIDTH - MARGIN + 4.0,
            y = MARGIN + 16.0 * i as f64
        )?;
    }
    writeln!(out, "</svg>")?;
    Ok(out)
}
