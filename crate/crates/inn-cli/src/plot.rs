//! Minimal SVG line charts.

use std::fmt::Write as _;
use std::path::Path;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Chart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log_x: bool,
    pub log_y: bool,
}

fn tf(v: f64, log: bool) -> f64 {
    if log {
        v.log10()
    } else {
        v
    }
}

pub fn write(path: &Path, chart: &Chart, series: &[Series]) -> std::io::Result<()> {
    let pts = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| (!chart.log_x || *x > 0.0) && (!chart.log_y || *y > 0.0))
        .map(|&(x, y)| (tf(x, chart.log_x), tf(y, chart.log_y)))
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (tf(x, chart.log_x) - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (tf(y, chart.log_y) - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, chart.title);
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {t} L{m} {b} L{r} {b}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    let lab = |v: f64, log: bool| if log { format!("{:.2e}", 10f64.powf(v)) } else { format!("{v:.3e}") };
    let _ = writeln!(svg, r#"<text x="{MARGIN}" y="{}" text-anchor="middle">{}</text>"#, H - MARGIN + 16.0, lab(x0, chart.log_x));
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W - MARGIN, H - MARGIN + 16.0, lab(x1, chart.log_x));
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 4.0, H - MARGIN, lab(y0, chart.log_y));
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 4.0, MARGIN + 4.0, lab(y1, chart.log_y));
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 20.0, chart.x_label);
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        chart.y_label
    );
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut d = String::new();
        for &(x, y) in &s.points {
            let (px, py) = (sx(x), sy(y));
            if px.is_finite() && py.is_finite() {
                let _ = write!(d, "{}{px:.2} {py:.2} ", if d.is_empty() { "M" } else { "L" });
            }
        }
        let _ = writeln!(svg, r#"<path d="{d}" stroke="{color}" fill="none" stroke-width="1.5"/>"#);
        let ly = MARGIN + 16.0 * k as f64;
        let _ = writeln!(svg, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, W - MARGIN - 150.0, s.name);
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg)
}
