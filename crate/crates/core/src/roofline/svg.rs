use std::fmt::Write;

use super::model::{ridge_point, RooflineReport};
use crate::error::Result;
use crate::profiler::{MemLevel, RankGroup};

const W: f64 = 720.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

struct LogAxes {
    x: (f64, f64),
    y: (f64, f64),
}

impl LogAxes {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x.log10() - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }
    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y.log10() - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }
}

/// Log-log roofline plot for one memory level. Markers follow the rank
/// groups: red circles for the top 5 kernels, yellow squares for ranks 6-20,
/// green triangles for the rest.
pub fn render_svg(report: &RooflineReport, level: MemLevel) -> Result<String> {
    let ridge = ridge_point(&report.device, level)?;
    let curve = report
        .curves
        .iter()
        .find(|(l, _)| *l == level)
        .map(|(_, c)| c.as_slice())
        .unwrap_or(&[]);
    let pts: Vec<_> = report.points.iter().filter(|p| p.level == level).collect();

    let xs = curve.iter().map(|c| c.0).chain(pts.iter().map(|p| p.ai));
    let ys = curve
        .iter()
        .map(|c| c.1)
        .chain(pts.iter().map(|p| p.achieved))
        .filter(|&y| y > 0.0);
    let (xmin, xmax) = xs.fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
    let (ymin, ymax) = ys.fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(v), b.max(v)));
    let axes = LogAxes {
        x: (xmin.log10().floor(), xmax.log10().ceil().max(xmin.log10().floor() + 1.0)),
        y: (ymin.log10().floor(), (ymax * 2.0).log10().ceil()),
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">Roofline ({}) - {}</text>"#,
        W / 2.0,
        level.as_str().to_uppercase(),
        report.device.name
    );
    // decade grid and tick labels
    for d in axes.x.0 as i32..=axes.x.1 as i32 {
        let x = axes.px(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{TOP}" x2="{x:.1}" y2="{}" stroke="#ddd"/><text x="{x:.1}" y="{}" text-anchor="middle">1e{d}</text>"##,
            H - BOTTOM,
            H - BOTTOM + 16.0
        );
    }
    for d in axes.y.0 as i32..=axes.y.1 as i32 {
        let y = axes.py(10f64.powi(d));
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">1e{d}</text>"##,
            W - RIGHT,
            LEFT - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">arithmetic intensity [FLOP/byte]</text>"#,
        (LEFT + W - RIGHT) / 2.0,
        H - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">performance [FLOP/s]</text>"#,
        H / 2.0,
        H / 2.0
    );

    let path: Vec<String> = curve
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", axes.px(x), axes.py(y)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="black" stroke-width="2"/>"#,
        path.join(" ")
    );
    let (rx, ry) = (axes.px(ridge), axes.py(report.device.peak_flops));
    let _ = writeln!(
        s,
        r#"<circle cx="{rx:.2}" cy="{ry:.2}" r="3" fill="black"/><text x="{:.2}" y="{:.2}">ridge {:.2} FLOP/B</text>"#,
        rx + 6.0,
        ry - 6.0,
        ridge
    );

    for p in &pts {
        let (x, y) = (axes.px(p.ai), axes.py(p.achieved.max(10f64.powf(axes.y.0))));
        let marker = match p.rank_group {
            RankGroup::Top5 => format!(r#"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="red"/>"#),
            RankGroup::Top6To20 => format!(
                r#"<rect x="{:.2}" y="{:.2}" width="9" height="9" fill="gold"/>"#,
                x - 4.5,
                y - 4.5
            ),
            RankGroup::Rest => format!(
                r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="green"/>"#,
                x,
                y - 5.0,
                x - 5.0,
                y + 4.0,
                x + 5.0,
                y + 4.0
            ),
        };
        let _ = writeln!(s, "{marker}<!-- {} -->", p.kernel);
    }
    let _ = writeln!(
        s,
        r#"<g transform="translate({},{})"><circle cx="0" cy="0" r="5" fill="red"/><text x="10" y="4">top 5</text><rect x="-4.5" y="13.5" width="9" height="9" fill="gold"/><text x="10" y="22">top (5-20]</text><polygon points="0,31 -5,40 5,40" fill="green"/><text x="10" y="40">top 20+</text></g>"#,
        W - RIGHT - 110.0,
        TOP + 10.0
    );
    s.push_str("</svg>\n");
    Ok(s)
}
