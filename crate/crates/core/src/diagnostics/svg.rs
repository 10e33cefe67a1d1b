//! Minimal static SVG line plots.

use std::fmt::Write;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#555555"];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
            dashed: false,
        }
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

/// Panels side by side; each axis is either linear or base-10 log.
#[derive(Debug, Clone)]
pub struct LogLogPlot {
    pub panels: Vec<Panel>,
    pub log_x: bool,
    pub log_y: bool,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if log {
            (lo, hi) = (lo.floor(), hi.ceil());
        }
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        Self { lo, hi, log }
    }

    fn frac(&self, v: f64) -> Option<f64> {
        let v = if self.log {
            if v <= 0.0 {
                return None;
            }
            v.log10()
        } else {
            v
        };
        v.is_finite().then(|| (v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            (self.lo as i32..=self.hi as i32)
                .map(|e| ((e as f64 - self.lo) / (self.hi - self.lo), format!("1e{e}")))
                .collect()
        } else {
            (0..=4)
                .map(|k| {
                    let f = k as f64 / 4.0;
                    (f, format!("{:.3}", self.lo + f * (self.hi - self.lo)))
                })
                .collect()
        }
    }
}

impl LogLogPlot {
    pub fn new(panels: Vec<Panel>) -> Self {
        Self {
            panels,
            log_x: true,
            log_y: true,
        }
    }

    pub fn to_svg(&self) -> String {
        let width = PANEL_W * self.panels.len().max(1) as f64;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        for (k, panel) in self.panels.iter().enumerate() {
            self.panel(&mut s, panel, k as f64 * PANEL_W);
        }
        s.push_str("</svg>\n");
        s
    }

    fn panel(&self, s: &mut String, panel: &Panel, x0: f64) {
        let pts = || panel.series.iter().flat_map(|ser| ser.points.iter());
        let ax = Axis::fit(pts().map(|p| p.0), self.log_x);
        let ay = Axis::fit(pts().map(|p| p.1), self.log_y);
        let (left, top) = (x0 + MARGIN, 30.0);
        let (w, h) = (PANEL_W - MARGIN - 16.0, PANEL_H - 30.0 - MARGIN);
        let px = |f: f64| left + f * w;
        let py = |f: f64| top + (1.0 - f) * h;

        let _ = writeln!(
            s,
            r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
            left + w / 2.0,
            escape(&panel.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="black"/>"#
        );
        for (f, label) in ax.ticks() {
            let _ = writeln!(
                s,
                r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/><text x="{0}" y="{3}" text-anchor="middle">{4}</text>"#,
                px(f),
                top + h,
                top + h + 4.0,
                top + h + 16.0,
                label
            );
        }
        for (f, label) in ay.ticks() {
            let _ = writeln!(
                s,
                r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/><text x="{3}" y="{4}" text-anchor="end">{5}</text>"#,
                left - 4.0,
                py(f),
                left,
                left - 6.0,
                py(f) + 4.0,
                label
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            left + w / 2.0,
            PANEL_H - 12.0,
            escape(&panel.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate({},{}) rotate(-90)" text-anchor="middle">{}</text>"#,
            x0 + 14.0,
            top + h / 2.0,
            escape(&panel.y_label)
        );

        for (i, ser) in panel.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let coords: Vec<String> = ser
                .points
                .iter()
                .filter_map(|&(x, y)| Some(format!("{:.2},{:.2}", px(ax.frac(x)?), py(ay.frac(y)?))))
                .collect();
            let dash = if ser.dashed { r#" stroke-dasharray="5,4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                coords.join(" ")
            );
            for c in &coords {
                let (cx, cy) = c.split_once(',').unwrap_or(("0", "0"));
                let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>"#);
            }
            let ly = top + 14.0 + 14.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{color}" stroke-width="1.5"{dash}/><text x="{3}" y="{4}">{5}</text>"#,
                left + w - 110.0,
                ly,
                left + w - 92.0,
                left + w - 88.0,
                ly + 4.0,
                escape(&ser.label)
            );
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_panels_and_series() {
        let panel = |t: &str| Panel {
            title: t.into(),
            x_label: "n".into(),
            y_label: "error".into(),
            series: vec![
                Series::new("griddy", vec![(6.0, 0.1), (11.0, 0.03), (21.0, 0.01)]),
                Series::new("floor", vec![(6.0, 0.004), (21.0, 0.004)]).dashed(),
            ],
        };
        let svg = LogLogPlot::new(vec![panel("marginal"), panel("joint <2D>")]).to_svg();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains("joint &lt;2D&gt;"));
        assert!(svg.contains("1e-2"));
    }
}
