use std::fmt::Write as _;

use crate::fadcurve::FadCurve;

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 220.0;
const MARGIN: f64 = 50.0;
const COLUMNS: usize = 3;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#7f7f7f"];

/// One panel per class with every method's curve overlaid, percent dropped
/// on the x axis and a dashed marker at beta.
pub fn curves_svg(curves: &[FadCurve], beta: f64) -> String {
    let mut classes: Vec<(usize, &str)> = Vec::new();
    let mut methods: Vec<&str> = Vec::new();
    for c in curves {
        if !classes.iter().any(|(k, _)| *k == c.class) {
            classes.push((c.class, &c.class_name));
        }
        if !methods.contains(&c.method.as_str()) {
            methods.push(&c.method);
        }
    }
    classes.sort_by_key(|(k, _)| *k);
    let metric = curves.first().map_or("metric", |c| c.metric_name.as_str());
    let cols = COLUMNS.min(classes.len().max(1));
    let rows = classes.len().div_ceil(cols).max(1);
    let width = cols as f64 * (PANEL_W + MARGIN) + MARGIN;
    let height = rows as f64 * (PANEL_H + MARGIN) + MARGIN + 20.0 * methods.len() as f64;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (slot, (class, name)) in classes.iter().enumerate() {
        let ox = MARGIN + (slot % cols) as f64 * (PANEL_W + MARGIN);
        let oy = MARGIN + (slot / cols) as f64 * (PANEL_H + MARGIN);
        let x = |p: f64| ox + p / 100.0 * PANEL_W;
        let y = |m: f64| oy + PANEL_H - m.clamp(0.0, 1.0) * PANEL_H;
        let _ = writeln!(
            out,
            r#"<rect x="{ox}" y="{oy}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, ox, oy - 6.0, escape(name));
        for tick in [0.0, 25.0, 50.0, 75.0, 100.0] {
            let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{tick}</text>"#, x(tick), oy + PANEL_H + 14.0);
        }
        for tick in [0.0, 0.5, 1.0] {
            let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{tick}</text>"#, ox - 4.0, y(tick) + 4.0);
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle">% features dropped</text>"#,
            ox + PANEL_W / 2.0,
            oy + PANEL_H + 28.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">{}</text>"#,
            ox - 30.0,
            oy + PANEL_H / 2.0,
            ox - 30.0,
            oy + PANEL_H / 2.0,
            escape(metric)
        );
        let _ = writeln!(
            out,
            r#"<line x1="{bx}" y1="{oy}" x2="{bx}" y2="{}" stroke="gray" stroke-dasharray="4 3"/>"#,
            oy + PANEL_H,
            bx = x(beta)
        );
        for c in curves.iter().filter(|c| c.class == *class) {
            let color = PALETTE[methods.iter().position(|m| *m == c.method).unwrap_or(0) % PALETTE.len()];
            let pts: Vec<String> = c.points.iter().map(|p| format!("{:.2},{:.2}", x(p.percent), y(p.metric))).collect();
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
        }
    }
    let ly = MARGIN + rows as f64 * (PANEL_H + MARGIN);
    for (k, m) in methods.iter().enumerate() {
        let yy = ly + 20.0 * k as f64;
        let color = PALETTE[k % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<line x1="{MARGIN}" y1="{yy}" x2="{}" y2="{yy}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            MARGIN + 24.0,
            MARGIN + 30.0,
            yy + 4.0,
            escape(m)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}
