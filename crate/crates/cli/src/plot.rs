//! Standalone SVG documents: scanpath overlays, confusion heat grids and
//! precision-recall polylines.

use std::fmt::Write as _;

use gazeforge_core::domain::{EmotionLabel, Scanpath, Scene, NUM_EMOTIONS};

use crate::evaluate::ClassCurve;
use crate::CliError;

const PALETTE: [&str; NUM_EMOTIONS] = [
    "#d62728", "#8c564b", "#9467bd", "#ff7f0e", "#1f77b4", "#2ca02c",
];

fn header(out: &mut String, w: f64, h: f64, display_w: f64) {
    let display_h = display_w * h / w;
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{display_w:.0}\" height=\"{display_h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">"
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Scene boxes with numbered fixation markers joined by saccade arrows.
pub fn scanpath_svg(scene: &Scene, scan: &Scanpath) -> Result<String, CliError> {
    if scan.fixations.is_empty() {
        return Err(CliError::Input("scanpath has no fixations".into()));
    }
    let (w, h) = (scene.size.w(), scene.size.h());
    let r = h / 60.0;
    let mut out = String::new();
    header(&mut out, w, h, 960.0);
    out.push_str("<defs><marker id=\"arrow\" viewBox=\"0 0 10 10\" refX=\"10\" refY=\"5\" markerWidth=\"6\" markerHeight=\"6\" orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\"#222\"/></marker></defs>\n");
    let _ = writeln!(
        out,
        "<rect width=\"{w:.0}\" height=\"{h:.0}\" fill=\"#f4f4f0\"/>"
    );
    let _ = writeln!(
        out,
        "<title>{} {} on {}</title>",
        escape(&scan.subject_id),
        scan.emotion,
        escape(&scan.scene_id)
    );
    for o in &scene.objects {
        let b = &o.bbox;
        let target = scan.fixations.iter().any(|f| f.target == Some(o.id));
        let _ = writeln!(
            out,
            "<rect class=\"object\" x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>",
            b.x_min,
            b.y_min,
            b.width(),
            b.height(),
            if target { "#444" } else { "#aaa" },
            if target { 3 } else { 1 }
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"{:.0}\" fill=\"#666\">{}#{}</text>",
            b.x_min + 2.0,
            b.y_min + r,
            r,
            escape(&o.category),
            o.id
        );
    }
    for pair in scan.fixations.windows(2) {
        let (a, b) = (pair[0].point, pair[1].point);
        let (dx, dy) = (b.u - a.u, b.v - a.v);
        let len = (dx * dx + dy * dy).sqrt();
        if len <= 2.0 * r {
            // markers overlap; keep a zero-length arrow so counts stay exact
            let _ = writeln!(
                out,
                "<line class=\"saccade\" x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#222\" stroke-width=\"2\" marker-end=\"url(#arrow)\"/>",
                a.u, a.v, b.u, b.v
            );
            continue;
        }
        let (ux, uy) = (dx / len, dy / len);
        let _ = writeln!(
            out,
            "<line class=\"saccade\" x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#222\" stroke-width=\"2\" marker-end=\"url(#arrow)\"/>",
            a.u + ux * r,
            a.v + uy * r,
            b.u - ux * r,
            b.v - uy * r
        );
    }
    for (i, f) in scan.fixations.iter().enumerate() {
        let p = f.point;
        let _ = writeln!(
            out,
            "<g class=\"fixation\"><circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"{:.1}\" fill=\"#e8553e\" fill-opacity=\"0.85\"/><text x=\"{:.1}\" y=\"{:.1}\" font-size=\"{:.0}\" text-anchor=\"middle\" dominant-baseline=\"central\" fill=\"#fff\">{}</text></g>",
            p.u,
            p.v,
            r,
            p.u,
            p.v,
            r * 1.2,
            i + 1
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Row-normalized confusion matrix as a heat grid.
pub fn confusion_svg(norm: &[[f64; NUM_EMOTIONS]; NUM_EMOTIONS]) -> String {
    let cell = 60.0;
    let margin = 90.0;
    let size = margin + cell * NUM_EMOTIONS as f64 + 10.0;
    let mut out = String::new();
    header(&mut out, size, size, size);
    let _ = writeln!(
        out,
        "<rect width=\"{size:.0}\" height=\"{size:.0}\" fill=\"#fff\"/>"
    );
    for (i, e) in EmotionLabel::ALL.iter().enumerate() {
        let c = margin + cell * (i as f64 + 0.5);
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{c:.1}\" font-size=\"12\" text-anchor=\"end\" dominant-baseline=\"central\">{e}</text>",
            margin - 6.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{c:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">{e}</text>",
            margin - 8.0
        );
    }
    for (i, row) in norm.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let shade = (255.0 * (1.0 - v.clamp(0.0, 1.0))).round() as u8;
            let (x, y) = (margin + cell * j as f64, margin + cell * i as f64);
            let _ = writeln!(
                out,
                "<rect class=\"cell\" x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell:.1}\" height=\"{cell:.1}\" fill=\"rgb({shade},{shade},255)\" stroke=\"#fff\"/>"
            );
            let ink = if *v > 0.5 { "#fff" } else { "#000" };
            let _ = writeln!(
                out,
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"13\" text-anchor=\"middle\" dominant-baseline=\"central\" fill=\"{ink}\">{v:.2}</text>",
                x + cell / 2.0,
                y + cell / 2.0
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// One precision-recall polyline per class on the unit square.
pub fn pr_svg(curves: &[ClassCurve]) -> Result<String, CliError> {
    if curves.is_empty() {
        return Err(CliError::Input("no precision-recall curves".into()));
    }
    let (plot, margin) = (400.0, 50.0);
    let size = plot + 2.0 * margin;
    let mut out = String::new();
    header(&mut out, size + 110.0, size, size + 110.0);
    let _ = writeln!(
        out,
        "<rect width=\"{:.0}\" height=\"{size:.0}\" fill=\"#fff\"/>",
        size + 110.0
    );
    let _ = writeln!(
        out,
        "<rect x=\"{margin}\" y=\"{margin}\" width=\"{plot}\" height=\"{plot}\" fill=\"none\" stroke=\"#000\"/>"
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.0}\" y=\"{:.0}\" font-size=\"13\" text-anchor=\"middle\">recall</text>",
        margin + plot / 2.0,
        size - 15.0
    );
    let _ = writeln!(
        out,
        "<text x=\"15\" y=\"{:.0}\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 15 {:.0})\">precision</text>",
        margin + plot / 2.0,
        margin + plot / 2.0
    );
    for (k, c) in curves.iter().enumerate() {
        let colour = PALETTE[c.class.ordinal()];
        let pts: Vec<String> =
            std::iter::once((0.0, c.points.first().map_or(1.0, |p| p.precision)))
                .chain(c.points.iter().map(|p| (p.recall, p.precision)))
                .map(|(r, p)| format!("{:.1},{:.1}", margin + r * plot, margin + (1.0 - p) * plot))
                .collect();
        let _ = writeln!(
            out,
            "<polyline class=\"pr\" points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"2\"/>",
            pts.join(" ")
        );
        let y = margin + 18.0 * k as f64;
        let _ = writeln!(
            out,
            "<text x=\"{:.0}\" y=\"{y:.0}\" font-size=\"12\" fill=\"{colour}\">{}</text>",
            size + 5.0,
            c.class
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
