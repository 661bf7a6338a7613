//! Self-contained SVG charts: inline polylines and rectangles, no scripts or
//! external assets.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scale {
    Linear,
    Log,
}

pub struct LinePlot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub x_scale: Scale,
    pub series: Vec<Series>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 * lo.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(out: &mut String, title: &str) {
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(out, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title)).unwrap();
}

fn axes(out: &mut String, x_label: &str, y_label: &str, x_ticks: &[(f64, String)], y_ticks: &[(f64, String)]) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    writeln!(out, r#"<path d="M{x0} {y1}V{y0}H{x1}" fill="none" stroke="black"/>"#).unwrap();
    for (px, label) in x_ticks {
        writeln!(out, r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/>"#, y0 + 5.0).unwrap();
        writeln!(out, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{label}</text>"#, y0 + 18.0).unwrap();
    }
    for (py, label) in y_ticks {
        writeln!(out, r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/>"#, x0 - 5.0).unwrap();
        writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{label}</text>"#, x0 - 8.0, py + 4.0).unwrap();
    }
    writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 12.0, escape(x_label)).unwrap();
    writeln!(
        out,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(y_label)
    )
    .unwrap();
}

fn ticks(lo: f64, hi: f64, to_px: impl Fn(f64) -> f64) -> Vec<(f64, String)> {
    (0..=4)
        .map(|k| {
            let v = lo + (hi - lo) * k as f64 / 4.0;
            (to_px(v), format!("{v:.3}"))
        })
        .collect()
}

impl LinePlot<'_> {
    pub fn render(&self) -> String {
        let tx = |x: f64| if self.x_scale == Scale::Log { x.log10() } else { x };
        let all = || self.series.iter().flat_map(|s| s.points.iter());
        let (xlo, xhi) = range(all().map(|p| tx(p.0)));
        let (ylo, yhi) = range(all().map(|p| p.1));
        let px = |x: f64| LEFT + (tx(x) - xlo) / (xhi - xlo) * (WIDTH - LEFT - RIGHT);
        let py = |y: f64| HEIGHT - BOTTOM - (y - ylo) / (yhi - ylo) * (HEIGHT - TOP - BOTTOM);

        let mut out = String::new();
        header(&mut out, self.title);
        let x_ticks: Vec<_> = (0..=4)
            .map(|k| {
                let t = xlo + (xhi - xlo) * k as f64 / 4.0;
                let v = if self.x_scale == Scale::Log { 10f64.powf(t) } else { t };
                (px(v), format!("{v:.3}"))
            })
            .collect();
        axes(&mut out, self.x_label, self.y_label, &x_ticks, &ticks(ylo, yhi, py));
        for (i, s) in self.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let pts = s
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect::<Vec<_>>()
                .join(" ");
            let dash = if s.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            writeln!(out, r#"<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#).unwrap();
            let ly = TOP + 16.0 * i as f64 + 10.0;
            let lx = WIDTH - RIGHT + 12.0;
            writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#, lx + 22.0).unwrap();
            writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 28.0, ly + 4.0, escape(&s.name)).unwrap();
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Grid of values colored from dark (low) to light (high), with a legend bar.
pub struct Heatmap<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    /// Row-major over `xs` then `ys`: `values[i * ys.len() + j]` is at `(xs[i], ys[j])`.
    pub values: &'a [f64],
}

fn color(t: f64) -> String {
    // Dark blue through teal to yellow.
    let t = t.clamp(0.0, 1.0);
    let stops = [(0.0, [40.0, 30.0, 110.0]), (0.5, [30.0, 150.0, 140.0]), (1.0, [250.0, 230.0, 40.0])];
    let k = if t <= 0.5 { 0 } else { 1 };
    let (t0, c0) = stops[k];
    let (t1, c1) = stops[k + 1];
    let u = (t - t0) / (t1 - t0);
    let c: Vec<u8> = (0..3).map(|i| (c0[i] + u * (c1[i] - c0[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

impl Heatmap<'_> {
    pub fn render(&self) -> String {
        let (xlo, xhi) = range(self.xs.iter().copied());
        let (ylo, yhi) = range(self.ys.iter().copied());
        let (vlo, vhi) = range(self.values.iter().copied());
        let cell_w = (WIDTH - LEFT - RIGHT) / self.xs.len().max(1) as f64;
        let cell_h = (HEIGHT - TOP - BOTTOM) / self.ys.len().max(1) as f64;
        // Cell centres sit at the grid values, so the axes run half a cell past them.
        let span_x = if self.xs.len() > 1 { (xhi - xlo) * self.xs.len() as f64 / (self.xs.len() - 1) as f64 } else { xhi - xlo };
        let span_y = if self.ys.len() > 1 { (yhi - ylo) * self.ys.len() as f64 / (self.ys.len() - 1) as f64 } else { yhi - ylo };
        let px = |x: f64| LEFT + cell_w / 2.0 + (x - xlo) / span_x * (WIDTH - LEFT - RIGHT);
        let py = |y: f64| HEIGHT - BOTTOM - cell_h / 2.0 - (y - ylo) / span_y * (HEIGHT - TOP - BOTTOM);

        let mut out = String::new();
        header(&mut out, self.title);
        for (i, _) in self.xs.iter().enumerate() {
            for (j, _) in self.ys.iter().enumerate() {
                let v = self.values[i * self.ys.len() + j];
                let fill = if v.is_finite() { color((v - vlo) / (vhi - vlo)) } else { "#cccccc".into() };
                writeln!(
                    out,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
                    LEFT + i as f64 * cell_w,
                    HEIGHT - BOTTOM - (j + 1) as f64 * cell_h,
                    cell_w + 0.05,
                    cell_h + 0.05
                )
                .unwrap();
            }
        }
        axes(&mut out, self.x_label, self.y_label, &ticks(xlo, xhi, px), &ticks(ylo, yhi, py));
        let (bx, steps) = (WIDTH - RIGHT + 20.0, 20);
        let bar_h = (HEIGHT - TOP - BOTTOM) / steps as f64;
        for k in 0..steps {
            let t = (k as f64 + 0.5) / steps as f64;
            let y = HEIGHT - BOTTOM - (k + 1) as f64 * bar_h;
            writeln!(out, r#"<rect x="{bx}" y="{y:.2}" width="16" height="{:.2}" fill="{}"/>"#, bar_h + 0.05, color(t)).unwrap();
        }
        writeln!(out, r#"<text x="{}" y="{}">{vhi:.4}</text>"#, bx + 22.0, TOP + 10.0).unwrap();
        writeln!(out, r#"<text x="{}" y="{}">{vlo:.4}</text>"#, bx + 22.0, HEIGHT - BOTTOM).unwrap();
        out.push_str("</svg>\n");
        out
    }
}
