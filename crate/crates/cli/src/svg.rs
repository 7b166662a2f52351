//! Minimal SVG plotting. Coordinates are printed with fixed precision so the
//! output is byte-stable.

use std::fmt::Write;

use nmmp::Point;

pub const GREEN: &str = "#1a9641";
pub const RED: &str = "#d7191c";
pub const BLUE: &str = "#2b83ba";
pub const GREY: &str = "#9e9e9e";
pub const ORANGE: &str = "#fdae61";

/// One panel with an equal-aspect data-to-pixel mapping (y up).
pub struct Panel {
    width: f64,
    height: f64,
    margin: f64,
    origin: Point,
    scale: f64,
    body: String,
}

impl Panel {
    /// Fits the bounding box of `points` into a `width x height` panel.
    pub fn fit(width: f64, height: f64, points: impl IntoIterator<Item = Point>) -> Self {
        let margin = 16.0;
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        if !lo[0].is_finite() {
            lo = [-1.0, -1.0];
            hi = [1.0, 1.0];
        }
        let span = [(hi[0] - lo[0]).max(1e-6), (hi[1] - lo[1]).max(1e-6)];
        let scale = ((width - 2.0 * margin) / span[0]).min((height - 2.0 * margin) / span[1]);
        let centre = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        Self { width, height, margin, origin: centre, scale, body: String::new() }
    }

    fn px(&self, p: Point) -> (f64, f64) {
        (
            self.width / 2.0 + (p[0] - self.origin[0]) * self.scale,
            self.height / 2.0 - (p[1] - self.origin[1]) * self.scale,
        )
    }

    pub fn polyline(&mut self, points: &[Point], color: &str, dashed: bool) {
        if points.len() < 2 {
            return;
        }
        let coords: Vec<String> = points
            .iter()
            .map(|&p| {
                let (x, y) = self.px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let dash = if dashed { " stroke-dasharray=\"6,4\"" } else { "" };
        let _ = writeln!(
            self.body,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"{dash}/>",
            coords.join(" ")
        );
    }

    pub fn circle(&mut self, p: Point, r: f64, color: &str) {
        let (x, y) = self.px(p);
        let _ = writeln!(self.body, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{r:.1}\" fill=\"{color}\"/>");
    }

    pub fn label(&mut self, p: Point, text: &str) {
        let (x, y) = self.px(p);
        let _ = writeln!(
            self.body,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            x + 4.0,
            y - 4.0,
            escape(text)
        );
    }

    pub fn title(&mut self, text: &str) {
        let _ = writeln!(
            self.body,
            "<text x=\"{:.2}\" y=\"12\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            self.margin,
            escape(text)
        );
    }

    fn render_into(&self, out: &mut String, dx: f64) {
        let _ = writeln!(out, "<g transform=\"translate({dx:.2},0)\">");
        let _ = writeln!(
            out,
            "<rect x=\"0\" y=\"0\" width=\"{:.2}\" height=\"{:.2}\" fill=\"white\" stroke=\"#cccccc\"/>",
            self.width, self.height
        );
        out.push_str(&self.body);
        out.push_str("</g>\n");
    }
}

/// Lays panels out left to right in one document.
pub fn document(panels: &[Panel]) -> String {
    let width: f64 = panels.iter().map(|p| p.width).sum();
    let height = panels.iter().map(|p| p.height).fold(0.0, f64::max);
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.2} {height:.2}\">\n"
    );
    let mut dx = 0.0;
    for p in panels {
        p.render_into(&mut out, dx);
        dx += p.width;
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
