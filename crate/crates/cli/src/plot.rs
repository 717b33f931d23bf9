//! Minimal SVG line charts: polylines, axes with ticks, shaded bands, dashed
//! reference lines, a legend and a caption.

use std::fmt::Write;

use anyhow::Result;

use crate::table::Table;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 180.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 80.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#555555"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub y: String,
    /// Columns holding the lower and upper edge of a shaded band.
    pub band: Option<(String, String)>,
    pub dashed: bool,
    /// Draw markers only, no connecting line.
    pub points: bool,
}

impl Series {
    pub fn line(label: &str, y: &str) -> Self {
        Self {
            label: label.into(),
            y: y.into(),
            band: None,
            dashed: false,
            points: false,
        }
    }

    pub fn band(mut self, lo: &str, hi: &str) -> Self {
        self.band = Some((lo.into(), hi.into()));
        self
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }

    pub fn points(mut self) -> Self {
        self.points = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub title: String,
    pub x: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub caption: String,
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders `fig` from the columns of `table`. Output depends only on the
/// table's values, so a table re-read from CSV renders identically.
pub fn render(fig: &Figure, table: &Table) -> Result<String> {
    let xs = table.numeric_column(&fig.x)?;
    let mut ys = Vec::new();
    let mut bands = Vec::new();
    for s in &fig.series {
        ys.push(table.numeric_column(&s.y)?);
        bands.push(match &s.band {
            Some((lo, hi)) => Some((table.numeric_column(lo)?, table.numeric_column(hi)?)),
            None => None,
        });
    }
    let (x0, x1) = range(xs.iter().copied());
    let all_y = ys
        .iter()
        .flatten()
        .chain(bands.iter().flatten().flat_map(|(l, h)| l.iter().chain(h)))
        .copied();
    let (y0, y1) = range(all_y);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )?;
    writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#)?;
    writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&fig.title)
    )?;

    for t in ticks(x0, x1) {
        let px = sx(t);
        writeln!(
            out,
            r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="#eeeeee"/>"##,
            TOP + ph
        )?;
        writeln!(
            out,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph + 16.0,
            tick_label(t)
        )?;
    }
    for t in ticks(y0, y1) {
        let py = sy(t);
        writeln!(
            out,
            r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#eeeeee"/>"##,
            LEFT + pw
        )?;
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            py + 4.0,
            tick_label(t)
        )?;
    }
    writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
    )?;
    writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        TOP + ph + 36.0,
        escape(&fig.x_label)
    )?;
    writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&fig.y_label)
    )?;

    for (k, s) in fig.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if let Some((lo, hi)) = &bands[k] {
            let mut pts: Vec<String> = xs
                .iter()
                .zip(hi)
                .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            pts.extend(
                xs.iter()
                    .zip(lo)
                    .rev()
                    .map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y))),
            );
            writeln!(
                out,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
                pts.join(" ")
            )?;
        }
        let pts: Vec<(f64, f64)> = xs
            .iter()
            .zip(&ys[k])
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(&x, &y)| (sx(x), sy(y)))
            .collect();
        if s.points {
            for (px, py) in &pts {
                writeln!(out, r#"<circle cx="{px:.2}" cy="{py:.2}" r="2.5" fill="{color}"/>"#)?;
            }
        } else {
            let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
            let joined: Vec<String> = pts.iter().map(|(px, py)| format!("{px:.2},{py:.2}")).collect();
            writeln!(
                out,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"{dash}/>"#,
                joined.join(" ")
            )?;
        }
        let ly = TOP + 14.0 + 20.0 * k as f64;
        let lx = LEFT + pw + 14.0;
        let dash = if s.dashed { r#" stroke-dasharray="6,4""# } else { "" };
        writeln!(
            out,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash}/>"#,
            lx + 22.0
        )?;
        writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 28.0,
            ly + 4.0,
            escape(&s.label)
        )?;
    }
    writeln!(
        out,
        r##"<text x="{LEFT}" y="{:.2}" font-size="11" fill="#444444">{}</text>"##,
        HEIGHT - 14.0,
        escape(&fig.caption)
    )?;
    out.push_str("</svg>\n");
    Ok(out)
}
