//! Minimal deterministic SVG: success curves and white-to-red heatmaps.
//! Coordinates are printed with fixed precision so output is byte-stable.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Training-support interval drawn as a shaded band.
    pub support: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn header(out: &mut String, w: f64, h: f64) {
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(out, r#"<rect x="0" y="0" width="{w:.0}" height="{h:.0}" fill="white"/>"#).unwrap();
}

fn tick_label(v: f64) -> String {
    let r = (v * 100.0).round() / 100.0;
    if r == r.trunc() {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

impl LinePlot {
    pub fn render(&self) -> String {
        let xs = self.series.iter().flat_map(|s| s.xs.iter().copied());
        let (mut x0, mut x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if !x0.is_finite() {
            (x0, x1) = (0.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + (1.0 - y.clamp(0.0, 1.0)) * ph;

        let mut out = String::new();
        header(&mut out, W, H);
        writeln!(out, r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, esc(&self.title)).unwrap();

        for (i, s) in self.series.iter().enumerate() {
            if let Some((a, b)) = s.support {
                let (a, b) = (a.max(x0), b.min(x1));
                let color = PALETTE[i % PALETTE.len()];
                // a degenerate support still gets a visible sliver
                let (l, r) = (sx(a), sx(b).max(sx(a) + 2.0));
                writeln!(
                    out,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}" fill-opacity="0.12"/>"#,
                    l,
                    TOP,
                    r - l,
                    ph
                )
                .unwrap();
            }
        }

        // axes and ticks
        writeln!(out, r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#).unwrap();
        for i in 0..=5 {
            let v = i as f64 / 5.0;
            let y = sy(v);
            writeln!(out, r##"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##, LEFT + pw).unwrap();
            writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, tick_label(v)).unwrap();
        }
        for i in 0..=6 {
            let v = x0 + (x1 - x0) * i as f64 / 6.0;
            let x = sx(v);
            writeln!(out, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 5.0).unwrap();
            writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 18.0, tick_label(v)).unwrap();
        }
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 10.0, esc(&self.x_label)).unwrap();
        writeln!(
            out,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            esc(&self.y_label)
        )
        .unwrap();

        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = s.xs.iter().zip(&s.ys).map(|(&x, &y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#, pts.join(" ")).unwrap();
            let ly = TOP + 10.0 + 18.0 * i as f64;
            let lx = W - RIGHT + 12.0;
            writeln!(out, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0).unwrap();
            writeln!(out, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 26.0, ly + 4.0, esc(&s.label)).unwrap();
        }
        out.push_str("</svg>\n");
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `values[row][col]`, rows follow `ys`, columns follow `xs`.
    pub values: Vec<Vec<f64>>,
}

/// 0 maps to white, 1 to pure red.
pub fn white_to_red(v: f64) -> String {
    let g = (255.0 * (1.0 - v.clamp(0.0, 1.0))).round() as u8;
    format!("#ff{g:02x}{g:02x}")
}

impl Heatmap {
    pub fn render(&self) -> String {
        let (nx, ny) = (self.xs.len().max(1), self.ys.len().max(1));
        let pw = W - LEFT - RIGHT;
        let ph = H - TOP - BOTTOM;
        let (cw, ch) = (pw / nx as f64, ph / ny as f64);

        let mut out = String::new();
        header(&mut out, W, H);
        writeln!(out, r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, esc(&self.title)).unwrap();
        for (r, row) in self.values.iter().enumerate() {
            // first row at the bottom
            let y = TOP + ph - (r + 1) as f64 * ch;
            for (c, &v) in row.iter().enumerate() {
                let x = LEFT + c as f64 * cw;
                writeln!(
                    out,
                    r#"<rect x="{x:.2}" y="{y:.2}" width="{cw:.2}" height="{ch:.2}" fill="{}"><title>{:.4}</title></rect>"#,
                    white_to_red(v),
                    v
                )
                .unwrap();
            }
        }
        writeln!(out, r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#).unwrap();
        let every = |n: usize| (n / 5).max(1);
        for (c, &v) in self.xs.iter().enumerate().step_by(every(nx)) {
            let x = LEFT + (c as f64 + 0.5) * cw;
            writeln!(out, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, tick_label(v)).unwrap();
        }
        for (r, &v) in self.ys.iter().enumerate().step_by(every(ny)) {
            let y = TOP + ph - (r as f64 + 0.5) * ch;
            writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, tick_label(v)).unwrap();
        }
        writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 10.0, esc(&self.x_label)).unwrap();
        writeln!(
            out,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            esc(&self.y_label)
        )
        .unwrap();
        // color bar
        let bx = W - RIGHT + 30.0;
        for i in 0..10 {
            let v0 = i as f64 / 10.0;
            let y = TOP + ph - (i + 1) as f64 * ph / 10.0;
            writeln!(
                out,
                r#"<rect x="{bx:.2}" y="{y:.2}" width="20" height="{:.2}" fill="{}"/>"#,
                ph / 10.0,
                white_to_red(v0 + 0.05)
            )
            .unwrap();
        }
        writeln!(out, r#"<rect x="{bx:.2}" y="{TOP:.2}" width="20" height="{ph:.2}" fill="none" stroke="black"/>"#).unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{:.2}">0</text>"#, bx + 26.0, TOP + ph + 4.0).unwrap();
        writeln!(out, r#"<text x="{:.2}" y="{:.2}">1</text>"#, bx + 26.0, TOP + 4.0).unwrap();
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn color_scale_endpoints() {
        assert_eq!(white_to_red(0.0), "#ffffff");
        assert_eq!(white_to_red(1.0), "#ff0000");
        assert_eq!(white_to_red(2.0), "#ff0000");
    }

    #[test]
    fn rendering_is_deterministic_and_escaped() {
        let plot = LinePlot {
            title: "a < b & c".into(),
            x_label: "yaw".into(),
            y_label: "success".into(),
            series: vec![Series { label: "±0°".into(), xs: vec![-1.0, 1.0], ys: vec![0.5, 0.5], support: Some((0.0, 0.0)) }],
        };
        let a = plot.render();
        assert_eq!(a, plot.render());
        assert!(a.contains("a &lt; b &amp; c"));
        assert!(a.ends_with("</svg>\n"));
    }
}
