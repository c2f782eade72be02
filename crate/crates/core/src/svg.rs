//! Standalone SVG charts: histogram against a normal density, normal QQ plot
//! and a running second-moment trace.
//!
//! Coordinates are printed with fixed precision so identical inputs give
//! byte-identical files.

use std::fmt::Write;

use crate::stats::{normal_pdf, normal_quantile};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 48.0;
const MAX_MARKERS: usize = 800;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Roughly five round tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return vec![lo];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    body: String,
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = |(a, b): (f64, f64)| if b > a { (a, b) } else { (a - 0.5, a + 0.5) };
        Frame { x: pad(x), y: pad(y), body: String::new() }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, dash: bool) {
        if pts.is_empty() {
            return;
        }
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect();
        let dash = if dash { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            self.body,
            r#"<polyline fill="none" stroke="{stroke}" stroke-width="1.8"{dash} points="{}"/>"#,
            coords.join(" ")
        );
    }

    fn render(self, title: &str, xlabel: &str, ylabel: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        let _ = writeln!(s, r##"<rect x="{x0}" y="{y0}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##, x1 - x0, y1 - y0);
        for t in ticks(self.x.0, self.x.1) {
            let p = self.px(t);
            let _ = writeln!(s, r##"<line x1="{p:.2}" y1="{y1}" x2="{p:.2}" y2="{:.1}" stroke="#444"/>"##, y1 + 5.0);
            let _ = writeln!(s, r#"<text x="{p:.2}" y="{:.1}" text-anchor="middle">{}</text>"#, y1 + 18.0, label(t));
        }
        for t in ticks(self.y.0, self.y.1) {
            let p = self.py(t);
            let _ = writeln!(s, r##"<line x1="{:.1}" y1="{p:.2}" x2="{x0}" y2="{p:.2}" stroke="#444"/>"##, x0 - 5.0);
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, p + 4.0, label(t));
        }
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 10.0, escape(xlabel));
        let _ = writeln!(
            s,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(ylabel)
        );
        s.push_str(&self.body);
        s.push_str("</svg>\n");
        s
    }
}

fn finite_sorted(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if n < 2.0 {
        return 1.0;
    }
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Density histogram with the `N(0, sd²)` density overlaid when `target_sd` is given.
pub fn histogram(values: &[f64], target_sd: Option<f64>, title: &str) -> String {
    let v = finite_sorted(values);
    if v.is_empty() {
        return Frame::new((0.0, 1.0), (0.0, 1.0)).render(title, "value", "density");
    }
    let (lo, hi) = (v[0], v[v.len() - 1]);
    let bins = ((v.len() as f64).sqrt().ceil() as usize).clamp(5, 60);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &x in &v {
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = v.len() as f64;
    let dens: Vec<f64> = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    let mut ymax = dens.iter().cloned().fold(0.0, f64::max);
    let (mut xlo, mut xhi) = (lo, lo + width * bins as f64);
    if let Some(sd) = target_sd {
        ymax = ymax.max(normal_pdf(0.0, sd));
        xlo = xlo.min(-4.0 * sd);
        xhi = xhi.max(4.0 * sd);
    }
    let mut f = Frame::new((xlo, xhi), (0.0, ymax * 1.05));
    for (k, d) in dens.iter().enumerate() {
        let x0 = f.px(lo + k as f64 * width);
        let x1 = f.px(lo + (k + 1) as f64 * width);
        let y = f.py(*d);
        let base = f.py(0.0);
        let _ = writeln!(
            f.body,
            r##"<rect x="{x0:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#8fb3d9" stroke="#3b6ea5" stroke-width="0.5"/>"##,
            (x1 - x0).max(0.0),
            (base - y).max(0.0)
        );
    }
    if let Some(sd) = target_sd {
        let pts: Vec<(f64, f64)> = (0..=200)
            .map(|i| {
                let x = xlo + (xhi - xlo) * i as f64 / 200.0;
                (x, normal_pdf(x, sd))
            })
            .collect();
        f.polyline(&pts, "#c0392b", false);
    }
    f.render(title, "value", "density")
}

/// Sample quantiles against `N(0, sd²)` quantiles; the sample SD is used when `target_sd` is absent.
pub fn qq_plot(values: &[f64], target_sd: Option<f64>, title: &str) -> String {
    let v = finite_sorted(values);
    let sd = target_sd.unwrap_or_else(|| sample_sd(&v));
    let n = v.len();
    let step = n.div_ceil(MAX_MARKERS).max(1);
    let pts: Vec<(f64, f64)> =
        (0..n).step_by(step).map(|i| (sd * normal_quantile((i as f64 + 0.5) / n as f64), v[i])).collect();
    let lo = pts.iter().map(|p| p.0.min(p.1)).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0.max(p.1)).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (-1.0, 1.0) };
    let mut f = Frame::new((lo, hi), (lo, hi));
    f.polyline(&[(lo, lo), (hi, hi)], "#c0392b", true);
    for &(x, y) in &pts {
        let _ = writeln!(f.body, r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#3b6ea5"/>"##, f.px(x), f.py(y));
    }
    f.render(title, "normal quantile", "sample quantile")
}

/// Running mean of `x²` over replications against the target variance.
pub fn variance_trace(values: &[f64], target_variance: Option<f64>, title: &str) -> String {
    let n = values.len();
    let mut acc = 0.0;
    let mut running = Vec::with_capacity(n);
    for (i, x) in values.iter().enumerate() {
        acc += x * x;
        running.push((i as f64 + 1.0, acc / (i as f64 + 1.0)));
    }
    let step = n.div_ceil(MAX_MARKERS).max(1);
    let mut pts: Vec<(f64, f64)> = running.iter().copied().step_by(step).collect();
    if let Some(last) = running.last() {
        if pts.last() != Some(last) {
            pts.push(*last);
        }
    }
    let skip = pts.len() / 50;
    let ys = pts.iter().skip(skip).map(|p| p.1).chain(target_variance);
    let (ylo, yhi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    let (ylo, yhi) = if ylo.is_finite() { (ylo, yhi) } else { (0.0, 1.0) };
    let pad = (yhi - ylo).max(1e-9) * 0.1;
    let mut f = Frame::new((1.0, n.max(2) as f64), (ylo - pad, yhi + pad));
    let shown: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.1 >= f.y.0 && p.1 <= f.y.1).collect();
    f.polyline(&shown, "#3b6ea5", false);
    if let Some(t) = target_variance {
        f.polyline(&[(1.0, t), (n.max(2) as f64, t)], "#c0392b", true);
    }
    f.render(title, "replications", "running mean of squares")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_cover_the_range() {
        let t = ticks(-3.2, 3.2);
        assert_eq!(t, vec![-2.0, 0.0, 2.0]);
        assert_eq!(ticks(0.0, 10.0), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(ticks(1.0, 1.0), vec![1.0]);
    }

    #[test]
    fn charts_are_well_formed_and_deterministic() {
        let v: Vec<f64> = (0..500).map(|i| normal_quantile((i as f64 + 0.5) / 500.0)).collect();
        for svg in [histogram(&v, Some(1.0), "h <1>"), qq_plot(&v, None, "q"), variance_trace(&v, Some(1.0), "t")] {
            assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
            assert!(!svg.contains("NaN"));
        }
        assert_eq!(histogram(&v, Some(1.0), "h"), histogram(&v, Some(1.0), "h"));
        assert!(histogram(&v, None, "a&b").contains("a&amp;b"));
    }

    #[test]
    fn degenerate_inputs_do_not_panic() {
        let _ = histogram(&[], None, "empty");
        let _ = histogram(&[0.0; 10], None, "constant");
        let _ = qq_plot(&[0.0; 10], None, "constant");
        let _ = variance_trace(&[], None, "empty");
    }
}
