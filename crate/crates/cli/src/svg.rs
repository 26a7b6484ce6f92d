//! Hand-written SVG: axes, polylines and point clouds.

use std::fmt::Write;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 50.0;

pub struct Plot {
    x: (f64, f64),
    y: (f64, f64),
    body: String,
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        let m = if lo.is_finite() { lo } else { 0.0 };
        return (m - 1.0, m + 1.0);
    }
    let pad = 0.02 * (hi - lo);
    (lo - pad, hi + pad)
}

impl Plot {
    pub fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        Plot { x: padded(x.0, x.1), y: padded(y.0, y.1), body: String::new() }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }

    pub fn points(&mut self, pts: &[(f64, f64)], color: &str) {
        for &(x, y) in pts {
            if x.is_finite() && y.is_finite() {
                let _ = writeln!(
                    self.body,
                    r#"<rect x="{:.2}" y="{:.2}" width="1" height="1" fill="{color}"/>"#,
                    self.px(x),
                    self.py(y)
                );
            }
        }
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], color: &str) {
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
    }

    pub fn marker(&mut self, x: f64, y: f64, color: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#, self.px(x), self.py(y));
    }

    pub fn finish(self, x_label: &str, y_label: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
        let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
        let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{x0}" y="{}" font-size="12">{:.4}</text><text x="{x1}" y="{}" font-size="12" text-anchor="end">{:.4}</text>"#,
            y0 + 16.0,
            self.x.0,
            y0 + 16.0,
            self.x.1
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{y0}" font-size="12" text-anchor="end">{:.4}</text><text x="{}" y="{}" font-size="12" text-anchor="end">{:.4}</text>"#,
            x0 - 4.0,
            self.y.0,
            x0 - 4.0,
            y1 + 12.0,
            self.y.1
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="14" text-anchor="middle">{x_label}</text>"#, WIDTH / 2.0, HEIGHT - 10.0);
        let _ = writeln!(s, r#"<text x="14" y="{}" font-size="14" text-anchor="middle">{y_label}</text>"#, HEIGHT / 2.0);
        s.push_str(&self.body);
        s.push_str("</svg>\n");
        s
    }
}
