//! Minimal static SVG plots — line charts and histograms.
//!
//! These are passive figures for eyeballing pipeline outputs, not a
//! charting library: fixed canvas, automatic ranges, one polyline per
//! series, optional log-log axes for stability curves.

use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 4] = ["#1f6fb2", "#c44e52", "#55a868", "#8172b2"];

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn from_points<'a>(points: impl Iterator<Item = &'a (f64, f64)>) -> Result<Self> {
        let mut f = Frame {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        let mut any = false;
        for &(x, y) in points {
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::Invalid(format!("non-finite plot point ({x}, {y})")));
            }
            any = true;
            f.x_min = f.x_min.min(x);
            f.x_max = f.x_max.max(x);
            f.y_min = f.y_min.min(y);
            f.y_max = f.y_max.max(y);
        }
        if !any {
            return Err(Error::Invalid("nothing to plot".into()));
        }
        // Degenerate spans get a symmetric pad so scaling stays finite.
        if f.x_min == f.x_max {
            f.x_min -= 0.5;
            f.x_max += 0.5;
        }
        if f.y_min == f.y_max {
            let pad = if f.y_min == 0.0 { 0.5 } else { f.y_min.abs() * 0.1 };
            f.y_min -= pad;
            f.y_max += pad;
        }
        Ok(f)
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_B
            - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(
        s,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
    s
}

fn axes(s: &mut String, frame: &Frame, x_label: &str, y_label: &str, log_log: bool) {
    let (x0, x1) = (MARGIN_L, WIDTH - MARGIN_R);
    let (y0, y1) = (HEIGHT - MARGIN_B, MARGIN_T);
    let _ = writeln!(
        s,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>"
    );
    let fmt = |v: f64| {
        let shown = if log_log { 10f64.powf(v) } else { v };
        format!("{shown:.3e}")
    };
    let _ = writeln!(
        s,
        "<text x=\"{x0}\" y=\"{}\" text-anchor=\"start\">{}</text>\
         <text x=\"{x1}\" y=\"{}\" text-anchor=\"end\">{}</text>",
        y0 + 16.0,
        fmt(frame.x_min),
        y0 + 16.0,
        fmt(frame.x_max)
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\
         <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>",
        x0 - 6.0,
        y0,
        fmt(frame.y_min),
        x0 - 6.0,
        y1 + 10.0,
        fmt(frame.y_max)
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One or more named series as polylines. With `log_log` both axes are
/// log10-scaled and every coordinate must be strictly positive.
pub fn line_plot(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(&str, Vec<(f64, f64)>)],
    log_log: bool,
) -> Result<()> {
    if series.is_empty() {
        return Err(Error::Invalid("no series to plot".into()));
    }
    let transformed: Vec<(&str, Vec<(f64, f64)>)> = series
        .iter()
        .map(|(name, pts)| {
            let pts: Result<Vec<(f64, f64)>> = pts
                .iter()
                .map(|&(x, y)| {
                    if log_log {
                        if x <= 0.0 || y <= 0.0 {
                            return Err(Error::Invalid(format!(
                                "log-log plot needs positive values, got ({x}, {y})"
                            )));
                        }
                        Ok((x.log10(), y.log10()))
                    } else {
                        Ok((x, y))
                    }
                })
                .collect();
            Ok((*name, pts?))
        })
        .collect::<Result<_>>()?;
    let frame = Frame::from_points(transformed.iter().flat_map(|(_, p)| p.iter()))?;

    let mut s = header(title);
    axes(&mut s, &frame, x_label, y_label, log_log);
    for (i, (name, pts)) in transformed.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            coords.join(" ")
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>",
            WIDTH - MARGIN_R - 150.0,
            MARGIN_T + 16.0 * i as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}

/// Equal-width histogram of a sample.
pub fn histogram(path: &Path, title: &str, x_label: &str, values: &[f64], bins: usize) -> Result<()> {
    if values.is_empty() || bins == 0 {
        return Err(Error::Invalid("histogram needs values and bins".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("non-finite histogram value".into()));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / span) * bins as f64) as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let max_count = *counts.iter().max().expect("bins nonempty") as f64;

    let frame = Frame {
        x_min: lo,
        x_max: lo + span,
        y_min: 0.0,
        y_max: max_count.max(1.0),
    };
    let mut s = header(title);
    axes(&mut s, &frame, x_label, "count", false);
    let bin_w = span / bins as f64;
    for (i, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let x = frame.px(lo + i as f64 * bin_w);
        let x_next = frame.px(lo + (i + 1) as f64 * bin_w);
        let y = frame.py(c as f64);
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
             fill=\"{}\" fill-opacity=\"0.7\"/>",
            x,
            y,
            (x_next - x).max(1.0),
            (HEIGHT - MARGIN_B) - y,
            PALETTE[0]
        );
    }
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}
