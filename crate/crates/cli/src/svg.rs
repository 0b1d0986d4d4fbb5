//! Minimal deterministic SVG 1.1 line and scatter plots.

use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 300.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 40.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Dots,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub name: String,
    pub style: Style,
    /// Index into the palette; a curve and its data share a colour.
    pub colour: usize,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-12 * hi.abs().max(1.0) {
        let pad = hi.abs().max(1.0) * 0.5;
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}").trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn panel(out: &mut String, p: &Panel, top: f64) -> std::fmt::Result {
    let (x0, x1) = extent(p.series.iter().flat_map(|s| s.points.iter().map(|q| q.0)));
    let (y0, y1) = extent(p.series.iter().flat_map(|s| s.points.iter().map(|q| q.1)));
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| top + MARGIN_TOP + (y1 - y) / (y1 - y0) * plot_h;

    writeln!(out, r#"<g class="panel">"#)?;
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        top + 18.0,
        escape(&p.title)
    )?;
    writeln!(
        out,
        r##"<rect x="{MARGIN_LEFT:.2}" y="{:.2}" width="{plot_w:.2}" height="{plot_h:.2}" fill="none" stroke="#444"/>"##,
        top + MARGIN_TOP
    )?;
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
            sx(xv),
            top + PANEL_HEIGHT - MARGIN_BOTTOM + 14.0,
            tick_label(xv)
        )?;
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"#,
            MARGIN_LEFT - 4.0,
            sy(yv) + 3.0,
            tick_label(yv)
        )?;
    }
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        top + PANEL_HEIGHT - 8.0,
        escape(&p.x_label)
    )?;
    if y0 < 0.0 && y1 > 0.0 {
        writeln!(
            out,
            r##"<line x1="{MARGIN_LEFT:.2}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="#bbb" stroke-dasharray="4 3"/>"##,
            sy(0.0),
            MARGIN_LEFT + plot_w
        )?;
    }
    for s in &p.series {
        let colour = PALETTE[s.colour % PALETTE.len()];
        let name = escape(&s.name);
        match s.style {
            Style::Line => {
                let pts: Vec<String> = s
                    .points
                    .iter()
                    .filter(|q| q.0.is_finite() && q.1.is_finite())
                    .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                    .collect();
                writeln!(
                    out,
                    r#"<polyline class="series" data-name="{name}" fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
                    pts.join(" ")
                )?;
            }
            Style::Dots => {
                writeln!(out, r#"<g class="observations" data-name="{name}" fill="{colour}">"#)?;
                for &(x, y) in s.points.iter().filter(|q| q.0.is_finite() && q.1.is_finite()) {
                    writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#, sx(x), sy(y))?;
                }
                writeln!(out, "</g>")?;
            }
        }
    }
    let mut ly = top + MARGIN_TOP + 14.0;
    for s in p.series.iter().filter(|s| s.style == Style::Line) {
        writeln!(
            out,
            r#"<text x="{:.2}" y="{ly:.2}" font-size="11" fill="{}">{}</text>"#,
            WIDTH - MARGIN_RIGHT - 120.0,
            PALETTE[s.colour % PALETTE.len()],
            escape(&s.name)
        )?;
        ly += 14.0;
    }
    writeln!(out, "</g>")
}

/// Panels stacked top to bottom in one document.
pub fn render(panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        let _ = panel(&mut out, p, i as f64 * PANEL_HEIGHT);
    }
    out.push_str("</svg>\n");
    out
}
