//! Minimal SVG line charts for weekly series.

use std::fmt::Write;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct ChartSeries {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<ChartSeries>,
}

impl LineChart {
    pub fn new(title: impl Into<String>) -> Self {
        LineChart {
            title: title.into(),
            x_label: "week".into(),
            y_label: "value".into(),
            series: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, values: Vec<f64>) -> &mut Self {
        self.series.push(ChartSeries {
            name: name.into(),
            values,
        });
        self
    }

    /// Renders one polyline per series over a shared y axis, with x ticks
    /// at week numbers and a legend on the right.
    pub fn to_svg(&self) -> String {
        let n = self.series.iter().map(|s| s.values.len()).max().unwrap_or(0).max(2);
        let finite = || self.series.iter().flat_map(|s| s.values.iter().copied()).filter(|v| v.is_finite());
        let y_min = finite().fold(0.0f64, f64::min);
        let mut y_max = finite().fold(f64::NEG_INFINITY, f64::max);
        if !(y_max > y_min) {
            y_max = y_min + 1.0;
        }
        let (step, y_top) = nice_axis(y_min, y_max);

        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let px = |i: usize| MARGIN_LEFT + plot_w * i as f64 / (n - 1) as f64;
        let py = |v: f64| MARGIN_TOP + plot_h * (1.0 - (v - y_min) / (y_top - y_min));

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            escape(&self.title)
        );

        let (x0, x1, yb) = (MARGIN_LEFT, MARGIN_LEFT + plot_w, MARGIN_TOP + plot_h);
        let _ = writeln!(svg, r#"<g stroke="black" stroke-width="1">"#);
        let _ = writeln!(svg, r#"<line x1="{x0}" y1="{yb}" x2="{x1}" y2="{yb}"/>"#);
        let _ = writeln!(svg, r#"<line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{yb}"/>"#);
        let _ = writeln!(svg, "</g>");

        let mut tick = y_min;
        while tick <= y_top + step * 1e-9 {
            let y = py(tick);
            let _ = writeln!(
                svg,
                r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#ddd"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
                x0 - 6.0,
                y + 4.0,
                fmt_tick(tick)
            );
            tick += step;
        }
        let every = (n / 12).max(1);
        for i in (0..n).step_by(every) {
            let x = px(i);
            let _ = writeln!(
                svg,
                r#"<line x1="{x:.2}" y1="{yb}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
                yb + 4.0,
                yb + 18.0,
                i + 1
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + plot_w / 2.0,
            HEIGHT - 8.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
            MARGIN_TOP + plot_h / 2.0,
            escape(&self.y_label)
        );

        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let points: Vec<String> = s
                .values
                .iter()
                .enumerate()
                .filter(|(_, v)| v.is_finite())
                .map(|(i, &v)| format!("{:.2},{:.2}", px(i), py(v)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                points.join(" ")
            );
            let ly = MARGIN_TOP + 10.0 + 20.0 * k as f64;
            let lx = x1 + 16.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                lx + 24.0,
                lx + 30.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// Tick step and rounded top for a range, using 1-2-5 steps.
fn nice_axis(lo: f64, hi: f64) -> (f64, f64) {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    (step, lo + step * ((hi - lo) / step).ceil())
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.2}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
