//! Minimal SVG scatter plots and boxplots. Each document carries its data
//! as CSV inside a leading comment so tests can read it back.

use std::fmt::Write;

use crate::stats::quantile_sorted;

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 56.0;

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-9 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = (hi - lo) * 0.05;
                (lo - pad, hi + pad)
            }
        };
        let (x0, x1) = span(&mut xs.clone());
        let (y0, y1) = span(&mut ys.clone());
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }
}

fn header(out: &mut String, data: &str, title: &str) {
    let _ = writeln!(out, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(out, "<!-- data\n{}-->", data.replace("--", "- -"));
    let _ = writeln!(out, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">");
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(out, "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>", W / 2.0, escape(title));
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str, x_ticks: bool) {
    let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    let _ = writeln!(out, "<path d=\"M{l} {t} L{l} {b} L{r} {b}\" stroke=\"black\" fill=\"none\"/>");
    for i in 0..=4 {
        let y = f.y0 + (f.y1 - f.y0) * i as f64 / 4.0;
        let py = f.py(y);
        let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"11\">{y:.1}</text>", l - 4.0, py + 4.0);
        let _ = writeln!(out, "<path d=\"M{} {py} L{l} {py}\" stroke=\"black\"/>", l - 3.0);
        if x_ticks {
            let x = f.x0 + (f.x1 - f.x0) * i as f64 / 4.0;
            let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{x:.1}</text>", f.px(x), b + 16.0);
        }
    }
    let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{}</text>", W / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 {})\">{}</text>",
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
}

/// Scatter plot; `identity` adds a dashed y = x line.
pub fn scatter(title: &str, xlabel: &str, ylabel: &str, points: &[(f64, f64)], identity: bool) -> String {
    let mut data = String::from("x,y\n");
    for (x, y) in points {
        let _ = writeln!(data, "{},{}", fmt(*x), fmt(*y));
    }
    let mut f = Frame::new(points.iter().map(|p| p.0), points.iter().map(|p| p.1));
    if identity {
        let lo = f.x0.min(f.y0);
        let hi = f.x1.max(f.y1);
        f = Frame { x0: lo, x1: hi, y0: lo, y1: hi };
    }
    let mut out = String::new();
    header(&mut out, &data, title);
    axes(&mut out, &f, xlabel, ylabel, true);
    if identity {
        let _ = writeln!(
            out,
            "<path d=\"M{} {} L{} {}\" stroke=\"red\" stroke-dasharray=\"6 4\"/>",
            fmt(f.px(f.x0)),
            fmt(f.py(f.x0)),
            fmt(f.px(f.x1)),
            fmt(f.py(f.x1))
        );
    }
    for (x, y) in points {
        let _ = writeln!(out, "<circle cx=\"{}\" cy=\"{}\" r=\"2.5\" fill=\"steelblue\" fill-opacity=\"0.7\"/>", fmt(f.px(*x)), fmt(f.py(*y)));
    }
    out.push_str("</svg>\n");
    out
}

/// Boxplot with whiskers at 1.5 IQR; empty groups are drawn as labels only.
pub fn boxplot(title: &str, ylabel: &str, groups: &[(String, Vec<f64>)]) -> String {
    let mut data = String::from("group,value\n");
    for (name, values) in groups {
        for v in values {
            let _ = writeln!(data, "{},{}", name.replace(',', ";"), fmt(*v));
        }
    }
    let all = groups.iter().flat_map(|g| g.1.iter().copied());
    let mut f = Frame::new(std::iter::once(0.0), all).with_x(0.0, groups.len().max(1) as f64);
    f.y0 = f.y0.min(0.0);
    let mut out = String::new();
    header(&mut out, &data, title);
    axes(&mut out, &f, "", ylabel, false);
    let slot = (W - 2.0 * MARGIN) / groups.len().max(1) as f64;
    for (i, (name, values)) in groups.iter().enumerate() {
        let cx = MARGIN + slot * (i as f64 + 0.5);
        let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{}</text>", fmt(cx), H - MARGIN + 16.0, escape(name));
        if values.is_empty() {
            continue;
        }
        let mut s = values.clone();
        s.sort_by(f64::total_cmp);
        let (q1, med, q3) = (quantile_sorted(&s, 0.25), quantile_sorted(&s, 0.5), quantile_sorted(&s, 0.75));
        let iqr = q3 - q1;
        let lo = s.iter().copied().find(|v| *v >= q1 - 1.5 * iqr).unwrap_or(q1);
        let hi = s.iter().rev().copied().find(|v| *v <= q3 + 1.5 * iqr).unwrap_or(q3);
        let bw = slot * 0.5;
        let _ = writeln!(
            out,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"lightsteelblue\" stroke=\"black\"/>",
            fmt(cx - bw / 2.0),
            fmt(f.py(q3)),
            fmt(bw),
            fmt((f.py(q1) - f.py(q3)).max(0.5))
        );
        let _ = writeln!(out, "<path d=\"M{} {} L{} {}\" stroke=\"black\" stroke-width=\"2\"/>", fmt(cx - bw / 2.0), fmt(f.py(med)), fmt(cx + bw / 2.0), fmt(f.py(med)));
        let _ = writeln!(out, "<path d=\"M{c} {} L{c} {} M{c} {} L{c} {}\" stroke=\"black\"/>", fmt(f.py(q3)), fmt(f.py(hi)), fmt(f.py(q1)), fmt(f.py(lo)), c = fmt(cx));
        for v in s.iter().filter(|v| **v < lo || **v > hi) {
            let _ = writeln!(out, "<circle cx=\"{}\" cy=\"{}\" r=\"2\" fill=\"none\" stroke=\"black\"/>", fmt(cx), fmt(f.py(*v)));
        }
    }
    out.push_str("</svg>\n");
    out
}

impl Frame {
    fn with_x(mut self, x0: f64, x1: f64) -> Self {
        self.x0 = x0;
        self.x1 = x1;
        self
    }
}

/// Data rows embedded in a plot produced by this module.
pub fn embedded_data(svg: &str) -> Option<Vec<Vec<String>>> {
    let start = svg.find("<!-- data\n")? + "<!-- data\n".len();
    let end = start + svg[start..].find("-->")?;
    Some(svg[start..end].lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect())
}
