//! Minimal SVG line plots, emitted as text with no graphics dependency.

use std::fmt::Write as _;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// A single-axes line plot; call `add_line`/`add_vlines`, then `render`.
pub struct Plot {
    title: String,
    x_label: String,
    y_label: String,
    lines: Vec<(String, Vec<(f64, f64)>)>,
    vlines: Vec<f64>,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.to_string(),
            x_label: x_label.to_string(),
            y_label: y_label.to_string(),
            lines: Vec::new(),
            vlines: Vec::new(),
        }
    }

    pub fn add_line(&mut self, name: &str, points: Vec<(f64, f64)>) {
        self.lines.push((name.to_string(), points));
    }

    /// Dashed vertical markers (e.g. fitted peak positions).
    pub fn add_vlines(&mut self, xs: &[f64]) {
        self.vlines.extend_from_slice(xs);
    }

    fn bounds(&self) -> ((f64, f64), (f64, f64)) {
        let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
        for (_, pts) in &self.lines {
            for &(x, y) in pts {
                if x.is_finite() && y.is_finite() {
                    x0 = x0.min(x);
                    x1 = x1.max(x);
                    y0 = y0.min(y);
                    y1 = y1.max(y);
                }
            }
        }
        if !(x0 < x1) {
            (x0, x1) = (0.0, 1.0);
        }
        if !(y0 < y1) {
            (y0, y1) = (y0.min(0.0), y0.min(0.0) + 1.0);
        }
        // A little headroom so curves do not touch the frame.
        let pad = 0.04 * (y1 - y0);
        ((x0, x1), (y0 - pad, y1 + pad))
    }

    pub fn render(&self) -> String {
        let ((x0, x1), (y0, y1)) = self.bounds();
        let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R);
        let py = |y: f64| HEIGHT - MARGIN_B - (y - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B);

        let mut s = String::new();
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
        );
        let _ = writeln!(
            s,
            "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
        );
        let _ = writeln!(
            s,
            "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{}\" height=\"{}\" \
             fill=\"none\" stroke=\"black\"/>",
            WIDTH - MARGIN_L - MARGIN_R,
            HEIGHT - MARGIN_T - MARGIN_B
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"18\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"14\">{}</text>",
            0.5 * WIDTH,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"12\">{}</text>",
            0.5 * WIDTH,
            HEIGHT - 8.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
             font-size=\"12\" transform=\"rotate(-90 14 {})\">{}</text>",
            0.5 * HEIGHT,
            0.5 * HEIGHT,
            escape(&self.y_label)
        );

        // Ticks: five per axis, trimmed float labels.
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let (x, y) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
            let _ = writeln!(
                s,
                "<line x1=\"{0:.1}\" y1=\"{1:.1}\" x2=\"{0:.1}\" y2=\"{2:.1}\" stroke=\"black\"/>\
                 <text x=\"{0:.1}\" y=\"{3:.1}\" text-anchor=\"middle\" \
                 font-family=\"sans-serif\" font-size=\"11\">{4}</text>",
                px(x),
                HEIGHT - MARGIN_B,
                HEIGHT - MARGIN_B + 5.0,
                HEIGHT - MARGIN_B + 18.0,
                tick_label(x)
            );
            let _ = writeln!(
                s,
                "<line x1=\"{0:.1}\" y1=\"{2:.1}\" x2=\"{1:.1}\" y2=\"{2:.1}\" stroke=\"black\"/>\
                 <text x=\"{3:.1}\" y=\"{4:.1}\" text-anchor=\"end\" \
                 font-family=\"sans-serif\" font-size=\"11\">{5}</text>",
                MARGIN_L - 5.0,
                MARGIN_L,
                py(y),
                MARGIN_L - 8.0,
                py(y) + 4.0,
                tick_label(y)
            );
        }

        for &x in &self.vlines {
            if x.is_finite() && x >= x0 && x <= x1 {
                let _ = writeln!(
                    s,
                    "<line x1=\"{0:.1}\" y1=\"{1}\" x2=\"{0:.1}\" y2=\"{2}\" \
                     stroke=\"#888888\" stroke-dasharray=\"4 3\"/>",
                    px(x),
                    MARGIN_T,
                    HEIGHT - MARGIN_B
                );
            }
        }

        for (i, (name, pts)) in self.lines.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let mut path = String::with_capacity(12 * pts.len());
            for &(x, y) in pts.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                let _ = write!(path, "{:.1},{:.1} ", px(x), py(y));
            }
            let _ = writeln!(
                s,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1\"/>",
                path.trim_end()
            );
            let ly = MARGIN_T + 16.0 * (i as f64 + 1.0);
            let _ = writeln!(
                s,
                "<line x1=\"{0}\" y1=\"{ly:.1}\" x2=\"{1}\" y2=\"{ly:.1}\" stroke=\"{color}\" \
                 stroke-width=\"2\"/><text x=\"{2}\" y=\"{3:.1}\" font-family=\"sans-serif\" \
                 font-size=\"11\">{4}</text>",
                WIDTH - MARGIN_R - 130.0,
                WIDTH - MARGIN_R - 105.0,
                WIDTH - MARGIN_R - 100.0,
                ly + 4.0,
                escape(name)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 {
        "0".to_string()
    } else if !(1e-3..1e6).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_wellformed_document() {
        let mut plot = Plot::new("t", "x", "y");
        plot.add_line("a", vec![(0.0, 0.0), (1.0, 2.0), (2.0, 1.0)]);
        plot.add_vlines(&[1.0]);
        let svg = plot.render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<polyline"));
        assert!(svg.matches("<svg").count() == 1);
    }

    #[test]
    fn degenerate_data_does_not_panic() {
        let mut plot = Plot::new("t", "x", "y");
        plot.add_line("a", vec![(1.0, 5.0)]);
        let svg = plot.render();
        assert!(svg.contains("</svg>"));
    }
}
