//! Minimal self-contained SVG line plots.

use std::path::Path;

use super::csv::Table;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub title: String,
    pub x: String,
    pub y: Vec<String>,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return None;
    }
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

/// Renders `spec.y` against `spec.x`. With `log_x`, rows with `x <= 0` are
/// dropped.
pub fn render_svg(table: &Table, spec: &PlotSpec) -> Result<String> {
    let missing = |c: &str| Error::Numerical(format!("plot column `{c}` not in table"));
    let xs = table.column(&spec.x).ok_or_else(|| missing(&spec.x))?;
    let ys = spec
        .y
        .iter()
        .map(|c| table.column(c).ok_or_else(|| missing(c)))
        .collect::<Result<Vec<_>>>()?;

    let keep: Vec<usize> = (0..xs.len()).filter(|&i| !spec.log_x || xs[i] > 0.0).collect();
    let fx = |x: f64| if spec.log_x { x.log10() } else { x };
    let (x0, x1) = bounds(keep.iter().map(|&i| fx(xs[i])))
        .ok_or_else(|| Error::Numerical("nothing to plot".into()))?;
    let (y0, y1) = bounds(ys.iter().flat_map(|y| keep.iter().map(move |&i| y[i])))
        .ok_or_else(|| Error::Numerical("nothing to plot".into()))?;

    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let px = |x: f64| LEFT + (fx(x) - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let mut w = |text: String| s.push_str(&text);
    w(format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    w(format!("<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"));
    w(format!(
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        LEFT + pw / 2.0,
        escape(&spec.title)
    ));
    w(format!(
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>\n"
    ));

    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let gx = x0 + f * (x1 - x0);
        let label = if spec.log_x { format!("{:.3}", 10f64.powf(gx)) } else { format!("{gx:.3}") };
        let sx = LEFT + f * pw;
        w(format!(
            "<line x1=\"{sx:.2}\" y1=\"{:.2}\" x2=\"{sx:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n<text x=\"{sx:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{label}</text>\n",
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0
        ));
        let gy = y0 + f * (y1 - y0);
        let sy = TOP + (1.0 - f) * ph;
        w(format!(
            "<line x1=\"{:.2}\" y1=\"{sy:.2}\" x2=\"{LEFT}\" y2=\"{sy:.2}\" stroke=\"black\"/>\n<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{gy:.4e}</text>\n",
            LEFT - 5.0,
            LEFT - 7.0,
            sy + 4.0
        ));
    }
    w(format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
        LEFT + pw / 2.0,
        H - 15.0,
        escape(&spec.x_label)
    ));
    w(format!(
        "<text transform=\"translate(16 {:.1}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n",
        TOP + ph / 2.0,
        escape(&spec.y_label)
    ));

    for (k, (name, y)) in spec.y.iter().zip(&ys).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = keep
            .iter()
            .filter(|&&i| y[i].is_finite())
            .map(|&i| format!("{:.2},{:.2}", px(xs[i]), py(y[i])))
            .collect();
        w(format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        let ly = TOP + 10.0 + 16.0 * k as f64;
        w(format!(
            "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n<text x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            LEFT + pw + 10.0,
            LEFT + pw + 30.0,
            LEFT + pw + 35.0,
            ly + 4.0,
            escape(name)
        ));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_svg_plot(table: &Table, spec: &PlotSpec, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(table, spec)?)?;
    Ok(())
}
