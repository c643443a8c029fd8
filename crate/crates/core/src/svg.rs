//! Bare-bones SVG plots: scatter, polyline and axis ticks.

use std::fmt::Write as _;

const W: f64 = 480.0;
const H: f64 = 360.0;
const M: f64 = 40.0;

#[derive(Debug, Clone)]
enum Layer {
    Points(Vec<(f64, f64)>, &'static str),
    Line(Vec<(f64, f64)>, &'static str),
}

#[derive(Debug, Clone, Default)]
pub struct Plot {
    title: String,
    layers: Vec<Layer>,
}

impl Plot {
    pub fn new(title: &str) -> Self {
        Self {
            title: title.to_string(),
            layers: Vec::new(),
        }
    }

    pub fn scatter(mut self, pts: Vec<(f64, f64)>, colour: &'static str) -> Self {
        self.layers.push(Layer::Points(pts, colour));
        self
    }

    pub fn line(mut self, pts: Vec<(f64, f64)>, colour: &'static str) -> Self {
        self.layers.push(Layer::Line(pts, colour));
        self
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for l in &self.layers {
            let (Layer::Points(p, _) | Layer::Line(p, _)) = l;
            for &(x, y) in p.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                b = (b.0.min(x), b.1.max(x), b.2.min(y), b.3.max(y));
            }
        }
        if !b.0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        let pad = |lo: f64, hi: f64| if hi - lo < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
        let (x0, x1) = pad(b.0, b.1);
        let (y0, y1) = pad(b.2, b.3);
        (x0, x1, y0, y1)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
        let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-size="10">"#);
        let _ = writeln!(s, r#"<text x="{}" y="16" text-anchor="middle">{}</text>"#, W / 2.0, escape(&self.title));
        let _ = writeln!(
            s,
            r#"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            W - 2.0 * M,
            H - 2.0 * M
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, sx(xv), H - M + 14.0, tick(xv));
            let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, M - 4.0, sy(yv) + 3.0, tick(yv));
        }
        for l in &self.layers {
            match l {
                Layer::Points(p, c) => {
                    for &(x, y) in p.iter().filter(|(x, y)| x.is_finite() && y.is_finite()) {
                        let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="1.2" fill="{c}" fill-opacity="0.5"/>"#, sx(x), sy(y));
                    }
                }
                Layer::Line(p, c) => {
                    let pts: Vec<String> = p
                        .iter()
                        .filter(|(x, y)| x.is_finite() && y.is_finite())
                        .map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y)))
                        .collect();
                    let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}"/>"#, pts.join(" "));
                }
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v.abs() >= 1e4 || (v != 0.0 && v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
