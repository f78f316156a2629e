use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Commented lines written before the CSV column header.
#[derive(Debug, Clone)]
pub struct Meta {
    pub command: &'static str,
    pub config: RunConfig,
    /// Seconds; omitted when the caller wants byte-reproducible files.
    pub wall_time: Option<f64>,
    pub notes: Vec<String>,
}

impl Meta {
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("evmchaos {VERSION} {}", self.command),
            format!("config: {}", serde_json::to_string(&self.config).expect("config serializes")),
        ];
        if let Some(t) = self.wall_time {
            out.push(format!("wall_time_s: {t:.3}"));
        }
        out.extend(self.notes.iter().cloned());
        out
    }
}

pub fn open(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Writes `# `-prefixed metadata, then a CSV table.
pub fn write_csv<I>(path: Option<&Path>, meta: &Meta, columns: &[&str], rows: I) -> io::Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = open(path)?;
    for line in meta.lines() {
        writeln!(w, "# {line}")?;
    }
    let mut csv = csv::WriterBuilder::new().from_writer(w);
    csv.write_record(columns)?;
    for row in rows {
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

/// Shortest representation that reads back to the same value; exponent form
/// outside [1e-5, 1e16].
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:?}")
    }
}

pub fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.into()
}

pub struct Scatter<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
}

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 70.0;

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

/// Static scatter plot; points outside the ranges are dropped and points
/// falling on the same pixel are drawn once.
pub fn scatter_svg(points: &[(f64, f64)], s: &Scatter) -> String {
    let (x0, x1) = s.x_range.unwrap_or_else(|| extent(points.iter().map(|p| p.0)));
    let (y0, y1) = s.y_range.unwrap_or_else(|| extent(points.iter().map(|p| p.1)));
    let pw = WIDTH - 2.0 * MARGIN;
    let ph = HEIGHT - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph;

    let pixels: BTreeSet<(i64, i64)> = points
        .iter()
        .filter(|(x, y)| x.is_finite() && y.is_finite() && (x0..=x1).contains(x) && (y0..=y1).contains(y))
        .map(|&(x, y)| ((px(x) * 2.0).round() as i64, (py(y) * 2.0).round() as i64))
        .collect();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="30" text-anchor="middle" font-size="16">{}</text>"#, WIDTH / 2.0, escape(s.title));
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for t in ticks(x0, x1) {
        let x = px(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.1}" y1="{0}" x2="{x:.1}" y2="{1}" stroke="black"/><text x="{x:.1}" y="{2}" text-anchor="middle">{3}</text>"#,
            HEIGHT - MARGIN,
            HEIGHT - MARGIN + 6.0,
            HEIGHT - MARGIN + 22.0,
            trim(t)
        );
    }
    for t in ticks(y0, y1) {
        let y = py(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{0}" y1="{y:.1}" x2="{MARGIN}" y2="{y:.1}" stroke="black"/><text x="{1}" y="{2:.1}" text-anchor="end">{3}</text>"#,
            MARGIN - 6.0,
            MARGIN - 10.0,
            y + 4.0,
            trim(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0,
        escape(s.x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{0}" text-anchor="middle" transform="rotate(-90 20 {0})">{1}</text>"#,
        HEIGHT / 2.0,
        escape(s.y_label)
    );
    let _ = write!(svg, r#"<path fill="none" stroke="black" stroke-width="0.6" stroke-linecap="round" d=""#);
    for (x, y) in &pixels {
        let _ = write!(svg, "M{:.1} {:.1}h0", *x as f64 / 2.0, *y as f64 / 2.0);
    }
    let _ = writeln!(svg, r#""/>"#);
    svg.push_str("</svg>\n");
    svg
}

fn trim(t: f64) -> String {
    let s = format!("{t:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
