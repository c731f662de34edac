//! SVG 1.1 flow-field frames.
//!
//! The viewBox is `0 0 W H` with no transform, so SVG user units are image
//! pixels with `y` pointing down, exactly as in the link files. Each link is a
//! `<line class="link">` from its origin to its end point, with the
//! coordinates written in shortest round-trip form, plus a small arrowhead
//! polygon at the end. Cohort `k` takes `PALETTE[k % PALETTE.len()]`;
//! unlabeled links are [`GRAY`]. The arena border and sensitive locations
//! are drawn in achromatic tones so they never read as a cohort color.

use std::fmt::Write;

use crowdflow::SensitiveLocation;

use crate::output::LinkRow;

/// Red and blue first, then the rest of the usual categorical set.
pub const PALETTE: [&str; 8] = ["#d62728", "#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
pub const GRAY: &str = "#7f7f7f";
const BORDER: &str = "#000000";
const LOCATION: &str = "#404040";
const HEAD_PX: f64 = 3.0;

pub fn color_of(cohort: Option<usize>) -> &'static str {
    cohort.map_or(GRAY, |k| PALETTE[k % PALETTE.len()])
}

pub fn frame_file_name(frame: usize) -> String {
    format!("frame_{frame:05}.svg")
}

/// One frame. `links` should already be restricted to that frame.
pub fn render_frame(frame: usize, links: &[LinkRow], arena: (f64, f64), locations: &[SensitiveLocation]) -> String {
    let (w, h) = arena;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, "<title>frame {frame}</title>");
    let _ = writeln!(
        s,
        r#"<rect class="border" x="0" y="0" width="{w}" height="{h}" fill="none" stroke="{BORDER}" stroke-width="1"/>"#
    );
    for l in locations {
        let _ = writeln!(
            s,
            r#"<circle class="location" id="loc-{}" cx="{}" cy="{}" r="{}" fill="none" stroke="{LOCATION}" stroke-dasharray="4 2"/>"#,
            xml_escape(&l.id),
            l.position.x,
            l.position.y,
            l.radius
        );
    }
    for l in links {
        let c = color_of(l.cohort_id);
        let _ = write!(
            s,
            r#"<line class="link" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{c}" stroke-width="1""#,
            l.from_x, l.from_y, l.to_x, l.to_y
        );
        if let Some(k) = l.cohort_id {
            let _ = write!(s, r#" data-cohort="{k}""#);
        }
        let _ = writeln!(s, "/>");
        let (dx, dy) = (l.to_x - l.from_x, l.to_y - l.from_y);
        let len = dx.hypot(dy);
        if len > 0.0 {
            let (ux, uy) = (dx / len, dy / len);
            let size = HEAD_PX.min(len / 2.0);
            let (bx, by) = (l.to_x - ux * size, l.to_y - uy * size);
            let (px, py) = (-uy * size / 2.0, ux * size / 2.0);
            let _ = writeln!(
                s,
                r#"<polygon class="head" points="{:.3},{:.3} {:.3},{:.3} {:.3},{:.3}" fill="{c}"/>"#,
                l.to_x,
                l.to_y,
                bx + px,
                by + py,
                bx - px,
                by - py
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// One SVG per frame in `frames`.
pub fn render_frames(
    links: &[LinkRow],
    frames: std::ops::Range<usize>,
    arena: (f64, f64),
    locations: &[SensitiveLocation],
) -> Vec<(String, Vec<u8>)> {
    frames
        .map(|f| {
            let mine: Vec<LinkRow> = links.iter().filter(|l| l.frame == f).copied().collect();
            (frame_file_name(f), render_frame(f, &mine, arena, locations).into_bytes())
        })
        .collect()
}
