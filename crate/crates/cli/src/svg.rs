//! Minimal SVG plots: band curves as polylines, reconstructed points as circles.

use std::f64::consts::PI;
use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 48.0;

/// A 2D plot with fixed axes.
pub struct Plot {
    x: (f64, f64),
    y: (f64, f64),
    title: String,
    x_label: String,
    y_label: String,
    body: String,
}

impl Plot {
    pub fn new(title: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        // Pad degenerate or tight ranges so every mark stays inside the frame.
        let pad = ((y.1 - y.0).abs() * 0.05).max(1e-9);
        Self {
            x,
            y: (y.0 - pad, y.1 + pad),
            title: title.to_string(),
            x_label: "alpha".into(),
            y_label: "lambda".into(),
            body: String::new(),
        }
    }

    pub fn labels(mut self, x: &str, y: &str) -> Self {
        self.x_label = x.into();
        self.y_label = y.into();
        self
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], class: &str) {
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y)))
            .collect();
        let _ = writeln!(self.body, r#"<polyline class="{class}" points="{}"/>"#, coords.join(" "));
    }

    pub fn circle(&mut self, x: f64, y: f64, class: &str) {
        let _ = writeln!(self.body, r#"<circle class="{class}" cx="{:.2}" cy="{:.2}" r="3"/>"#, self.px(x), self.py(y));
    }

    /// Horizontal band between `lo` and `hi`, for shading gaps.
    pub fn band(&mut self, lo: f64, hi: f64, class: &str) {
        let (top, bottom) = (self.py(hi), self.py(lo));
        let _ = writeln!(
            self.body,
            r#"<rect class="{class}" x="{MARGIN}" y="{top:.2}" width="{:.2}" height="{:.2}"/>"#,
            WIDTH - 2.0 * MARGIN,
            bottom - top
        );
    }

    pub fn finish(self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        s.push_str(
            "<style>\
             .axis{stroke:#333;fill:none}\
             .band{stroke:#1f4e9c;stroke-width:1.5;fill:none}\
             .profile{stroke:#1f4e9c;stroke-width:1;fill:none;opacity:0.6}\
             .point{fill:#2a9d3a;fill-opacity:0.8}\
             .localized{fill:#c0392b}\
             .gap{fill:#f2d7d5;opacity:0.5}\
             text{font-family:sans-serif;font-size:12px}\
             </style>\n",
        );
        let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(s, r#"<rect class="axis" x="{x0}" y="{y0}" width="{}" height="{}"/>"#, x1 - x0, y1 - y0);
        let _ = writeln!(s, r#"<text x="{x0}" y="{}">{}</text>"#, y0 - 16.0, escape(&self.title));
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, 0.5 * (x0 + x1), HEIGHT - 10.0, escape(&self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">{}</text>"#,
            0.5 * (y0 + y1),
            0.5 * (y0 + y1),
            escape(&self.y_label)
        );
        for (v, label) in [(self.x.0, self.x.0), (self.x.1, self.x.1)] {
            let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, self.px(v), y1 + 16.0, tick(label));
        }
        for v in [self.y.0, self.y.1] {
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 4.0, self.py(v) + 4.0, tick(v));
        }
        s.push_str(&self.body);
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if (v.abs() - PI).abs() < 1e-12 {
        return if v < 0.0 { "-π".into() } else { "π".into() };
    }
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.3}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Value range of `values`, or `(0, 1)` when empty.
pub fn extent(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marks_land_inside_the_frame() {
        let mut p = Plot::new("t", (-PI, PI), (0.0, 4.0));
        p.polyline(&[(-PI, 0.0), (PI, 4.0)], "band");
        p.circle(0.0, 2.0, "point localized");
        let s = p.finish();
        assert!(s.starts_with("<svg"));
        assert!(s.contains(r#"class="point localized""#));
        assert!(s.contains("-π"));
        for x in [p_x(-PI), p_x(PI)] {
            assert!((MARGIN..=WIDTH - MARGIN).contains(&x));
        }
    }

    fn p_x(x: f64) -> f64 {
        Plot::new("", (-PI, PI), (0.0, 1.0)).px(x)
    }

    #[test]
    fn extent_of_empty_is_unit() {
        assert_eq!(extent(Vec::new()), (0.0, 1.0));
        assert_eq!(extent(vec![2.0, -1.0, f64::NAN]), (-1.0, 2.0));
    }
}
