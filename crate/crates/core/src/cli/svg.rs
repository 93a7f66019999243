//! Minimal static SVG line plots.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 55.0;

#[derive(Debug, Clone)]
pub struct Style {
    pub color: &'static str,
    pub dash: Option<&'static str>,
    pub width: f64,
}

#[derive(Debug, Clone)]
pub enum Item {
    /// Broken into separate polylines at non-finite points.
    Line { points: Vec<(f64, f64)>, style: Style },
    Circles { points: Vec<(f64, f64)>, radius: f64, color: &'static str },
    HLine { y: f64, style: Style },
    VLine { x: f64, style: Style },
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub items: Vec<Item>,
    /// (label, color) pairs drawn in the top-left corner.
    pub legend: Vec<(String, &'static str)>,
}

/// Tick spacing of 1, 2 or 5 times a power of ten giving about six ticks.
fn tick_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = tick_step(hi - lo);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    fn sx(&self, x: f64) -> f64 {
        let (a, b) = self.x_range;
        LEFT + (x - a) / (b - a) * (WIDTH - LEFT - RIGHT)
    }

    fn sy(&self, y: f64) -> f64 {
        let (a, b) = self.y_range;
        HEIGHT - BOTTOM - (y - a) / (b - a) * (HEIGHT - TOP - BOTTOM)
    }

    fn inside(&self, (x, y): (f64, f64)) -> bool {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        x.is_finite() && y.is_finite() && x >= x0 && x <= x1 && y >= y0 && y <= y1
    }

    fn style_attrs(style: &Style) -> String {
        let mut s = format!(r#"fill="none" stroke="{}" stroke-width="{}""#, style.color, style.width);
        if let Some(d) = style.dash {
            let _ = write!(s, r#" stroke-dasharray="{d}""#);
        }
        s
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        let _ = writeln!(
            out,
            r#"<clipPath id="frame"><rect x="{LEFT}" y="{TOP}" width="{}" height="{}"/></clipPath>"#,
            WIDTH - LEFT - RIGHT,
            HEIGHT - TOP - BOTTOM
        );
        for t in ticks(x0, x1) {
            let px = self.sx(t);
            let _ = writeln!(
                out,
                r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                HEIGHT - BOTTOM,
                HEIGHT - BOTTOM + 5.0,
                HEIGHT - BOTTOM + 18.0,
                fmt_tick(t)
            );
        }
        for t in ticks(y0, y1) {
            let py = self.sy(t);
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 5.0,
                LEFT - 8.0,
                py + 4.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            (LEFT + WIDTH - RIGHT) / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (TOP + HEIGHT - BOTTOM) / 2.0,
            (TOP + HEIGHT - BOTTOM) / 2.0,
            escape(&self.y_label)
        );

        let _ = writeln!(out, r#"<g clip-path="url(#frame)">"#);
        for item in &self.items {
            match item {
                Item::Line { points, style } => {
                    let attrs = Self::style_attrs(style);
                    let mut run: Vec<String> = Vec::new();
                    let flush = |run: &mut Vec<String>, out: &mut String| {
                        if run.len() > 1 {
                            let _ = writeln!(out, r#"<polyline {attrs} points="{}"/>"#, run.join(" "));
                        }
                        run.clear();
                    };
                    for &(x, y) in points {
                        if x.is_finite() && y.is_finite() {
                            run.push(format!("{:.2},{:.2}", self.sx(x), self.sy(y)));
                        } else {
                            flush(&mut run, &mut out);
                        }
                    }
                    flush(&mut run, &mut out);
                }
                Item::Circles { points, radius, color } => {
                    for &p in points.iter().filter(|p| self.inside(**p)) {
                        let _ = writeln!(
                            out,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="{radius}" fill="none" stroke="{color}"/>"#,
                            self.sx(p.0),
                            self.sy(p.1)
                        );
                    }
                }
                Item::HLine { y, style } => {
                    let py = self.sy(*y);
                    let _ = writeln!(
                        out,
                        r#"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" {}/>"#,
                        WIDTH - RIGHT,
                        Self::style_attrs(style)
                    );
                }
                Item::VLine { x, style } => {
                    let px = self.sx(*x);
                    let _ = writeln!(
                        out,
                        r#"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" {}/>"#,
                        HEIGHT - BOTTOM,
                        Self::style_attrs(style)
                    );
                }
            }
        }
        let _ = writeln!(out, "</g>");
        let _ = writeln!(
            out,
            r#"<rect x="{LEFT}" y="{TOP}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            WIDTH - LEFT - RIGHT,
            HEIGHT - TOP - BOTTOM
        );
        for (k, (label, color)) in self.legend.iter().enumerate() {
            let y = TOP + 16.0 + 16.0 * k as f64;
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
                LEFT + 10.0,
                LEFT + 30.0,
                LEFT + 36.0,
                y + 4.0,
                escape(label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

/// Padded [min, max] of the finite values, or `fallback` when there are none.
pub fn data_range(values: impl Iterator<Item = f64>, fallback: (f64, f64)) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return fallback;
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.5 };
    (lo - pad, hi + pad)
}
