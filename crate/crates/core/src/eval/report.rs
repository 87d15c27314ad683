use std::fmt::Write;

use super::{PrCurve, SweepResult};

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Axes {
    x: (f64, f64),
    y: (f64, f64),
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (H - 2.0 * MARGIN)
    }

    fn frame(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (x0, x1, y0, y1) = (self.px(self.x.0), self.px(self.x.1), self.py(self.y.0), self.py(self.y.1));
        let _ = writeln!(
            out,
            r#"<path d="M{x0:.1} {y1:.1} L{x0:.1} {y0:.1} L{x1:.1} {y0:.1}" fill="none" stroke="black"/>"#
        );
        for i in 0..=4 {
            let fx = self.x.0 + (self.x.1 - self.x.0) * i as f64 / 4.0;
            let fy = self.y.0 + (self.y.1 - self.y.0) * i as f64 / 4.0;
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{fx:.2}</text>"#,
                self.px(fx),
                y0 + 14.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="end">{fy:.2}</text>"#,
                x0 - 4.0,
                self.py(fy) + 3.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{xlabel}</text>"#,
            W / 2.0,
            H - 8.0
        );
        let _ = writeln!(
            out,
            r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">{ylabel}</text>"#,
            H / 2.0,
            H / 2.0
        );
    }
}

fn open() -> String {
    format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#) + "\n"
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// mAP against pruning probability, with one standard deviation error bars.
pub fn sweep_svg(results: &[SweepResult]) -> String {
    let lo = results.iter().map(|r| r.map_mean - r.map_std).fold(f64::INFINITY, f64::min);
    let hi = results.iter().map(|r| r.map_mean + r.map_std).fold(f64::NEG_INFINITY, f64::max);
    let pad = ((hi - lo) * 0.1).max(0.01);
    let axes = Axes {
        x: (0.0, 1.0),
        y: ((lo - pad).max(0.0), (hi + pad).min(1.0)),
    };
    let mut out = open();
    axes.frame(&mut out, "pruning probability", "mAP");
    let path: Vec<String> = results
        .iter()
        .map(|r| format!("{:.1} {:.1}", axes.px(r.p), axes.py(r.map_mean)))
        .collect();
    if !path.is_empty() {
        let _ = writeln!(out, r#"<path d="M{}" fill="none" stroke="{}"/>"#, path.join(" L"), COLORS[0]);
    }
    for r in results {
        let x = axes.px(r.p);
        let (a, b) = (axes.py(r.map_mean - r.map_std), axes.py(r.map_mean + r.map_std));
        let _ = writeln!(out, r#"<path d="M{x:.1} {a:.1} L{x:.1} {b:.1}" stroke="{}"/>"#, COLORS[0]);
        let _ = writeln!(
            out,
            r#"<circle cx="{x:.1}" cy="{:.1}" r="3" fill="{}"/>"#,
            axes.py(r.map_mean),
            COLORS[0]
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Precision-recall curves, one polyline per named curve.
pub fn pr_curve_svg(curves: &[(String, PrCurve)]) -> String {
    let axes = Axes { x: (0.0, 1.0), y: (0.0, 1.0) };
    let mut out = open();
    axes.frame(&mut out, "recall", "precision");
    for (i, (name, curve)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = curve
            .points
            .iter()
            .map(|&(r, p)| format!("{:.1} {:.1}", axes.px(r), axes.py(p)))
            .collect();
        if !path.is_empty() {
            let _ = writeln!(out, r#"<path d="M{}" fill="none" stroke="{color}"/>"#, path.join(" L"));
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" fill="{color}">{} (AP {:.3})</text>"#,
            W - MARGIN - 110.0,
            MARGIN + 12.0 * i as f64,
            escape(name),
            curve.ap
        );
    }
    out.push_str("</svg>\n");
    out
}
