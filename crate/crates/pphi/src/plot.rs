//! Minimal deterministic SVG plots.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::bail;

use crate::io::write_bytes;

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const BINS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Scatter,
    /// Histogram of the x coordinates; y is ignored.
    Histogram,
    /// Points joined in the given order.
    Line,
}

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>) -> Self {
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5f64.max(0.05 * lo.abs()) };
        Self { lo: lo - pad, hi: hi + pad }
    }

    fn map(&self, v: f64, start: f64, end: f64) -> f64 {
        start + (v - self.lo) / (self.hi - self.lo) * (end - start)
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// The SVG text of a plot of `data`.
pub fn render(data: &[(f64, f64)], kind: PlotKind, title: &str, x_label: &str, y_label: &str) -> anyhow::Result<String> {
    if data.is_empty() {
        bail!("cannot plot empty data");
    }
    if data.iter().any(|(x, y)| !x.is_finite() || (kind != PlotKind::Histogram && !y.is_finite())) {
        bail!("cannot plot non-finite values");
    }
    let pts: Vec<(f64, f64)> = match kind {
        PlotKind::Histogram => {
            let ax = Axis::new(data.iter().map(|p| p.0));
            let width = (ax.hi - ax.lo) / BINS as f64;
            let mut counts = vec![0usize; BINS];
            for &(x, _) in data {
                counts[(((x - ax.lo) / width) as usize).min(BINS - 1)] += 1;
            }
            counts.iter().enumerate().map(|(i, &c)| (ax.lo + (i as f64 + 0.5) * width, c as f64)).collect()
        }
        _ => data.to_vec(),
    };
    let ax = Axis::new(pts.iter().map(|p| p.0));
    let ay = match kind {
        PlotKind::Histogram => Axis { lo: 0.0, hi: 1.05 * pts.iter().map(|p| p.1).fold(1.0, f64::max) },
        _ => Axis::new(pts.iter().map(|p| p.1)),
    };
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN / 2.0, HEIGHT - MARGIN, MARGIN / 2.0);
    let px = |x: f64| ax.map(x, x0, x1);
    let py = |y: f64| ay.map(y, y0, y1);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="16" font-size="13" text-anchor="middle">{}</text>"#, WIDTH / 2.0, esc(title));
    let _ = writeln!(
        s,
        r#"<path d="M{x0:.2} {y1:.2}L{x0:.2} {y0:.2}L{x1:.2} {y0:.2}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for (v, anchor, x) in [(ax.lo, "start", x0), (ax.hi, "end", x1)] {
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" font-size="10" text-anchor="{anchor}">{v:.4}</text>"#, y0 + 14.0);
    }
    for (v, y) in [(ay.lo, y0), (ay.hi, y1 + 8.0)] {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{y:.2}" font-size="10" text-anchor="end">{v:.4}</text>"#, x0 - 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        esc(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" font-size="11" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        esc(y_label)
    );
    match kind {
        PlotKind::Scatter => {
            s.push_str("<g fill=\"steelblue\" fill-opacity=\"0.5\">\n");
            for &(x, y) in &pts {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.2"/>"#, px(x), py(y));
            }
            s.push_str("</g>\n");
        }
        PlotKind::Line => {
            let d: Vec<String> =
                pts.iter().enumerate().map(|(i, &(x, y))| format!("{}{:.2} {:.2}", if i == 0 { 'M' } else { 'L' }, px(x), py(y))).collect();
            let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#, d.join(""));
            for &(x, y) in &pts {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#, px(x), py(y));
            }
        }
        PlotKind::Histogram => {
            let w = (px(pts[1 % pts.len()].0) - px(pts[0].0)).abs().max(1.0);
            s.push_str("<g fill=\"steelblue\">\n");
            for &(x, c) in &pts {
                let top = py(c);
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{top:.2}" width="{:.2}" height="{:.2}"/>"#,
                    px(x) - w / 2.0,
                    w,
                    y0 - top
                );
            }
            s.push_str("</g>\n");
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(data: &[(f64, f64)], kind: PlotKind, path: &Path, title: &str, x_label: &str, y_label: &str) -> anyhow::Result<()> {
    let svg = render(data, kind, title, x_label, y_label)?;
    write_bytes(path, svg.as_bytes())
}
