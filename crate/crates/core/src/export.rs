//! CSV and SVG renderings of a trajectory file.

use std::fmt::Write as _;

use thiserror::Error;

use crate::trace::TraceOutput;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv: {0}")]
    Flush(#[from] std::io::Error),
}

pub const CSV_HEADER: [&str; 7] = ["object_id", "frame_index", "time_s", "x_m", "y_m", "speed_mps", "heading_rad"];

fn fixed6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".into()
    } else {
        s
    }
}

/// One row per trajectory point, objects in file order.
pub fn to_csv(trace: &TraceOutput) -> Result<Vec<u8>, ExportError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for t in &trace.trajectories {
        for (i, p) in t.points.iter().enumerate() {
            let speed = t.speeds_mps.get(i).copied().unwrap_or(0.0);
            let heading = t.headings_rad.get(i).copied().unwrap_or(0.0);
            w.write_record([
                t.object_id.clone(),
                p.frame_index.to_string(),
                fixed6(p.time_s),
                fixed6(p.x_m),
                fixed6(p.y_m),
                fixed6(speed),
                fixed6(heading),
            ])?;
        }
    }
    w.into_inner().map_err(|e| ExportError::Flush(e.into_error()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlotStyle {
    Points,
    Path,
    #[default]
    Both,
}

impl std::str::FromStr for PlotStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "points" => Ok(Self::Points),
            "path" => Ok(Self::Path),
            "both" => Ok(Self::Both),
            _ => Err(format!("unknown plot style `{s}` (points, path, both)")),
        }
    }
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const PLOT: f64 = 600.0;
const MARGIN: f64 = 50.0;
const LEGEND_W: f64 = 180.0;

fn num(v: f64) -> String {
    let s = format!("{v:.8}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Top-down plot in meters with equal axis scales. Glyphs are
/// `<circle class="glyph" data-object=…>`; the origin (hit point) is a cross.
pub fn to_svg(trace: &TraceOutput, style: PlotStyle) -> String {
    let (mut x0, mut x1, mut y0, mut y1) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for p in trace.trajectories.iter().flat_map(|t| &t.points) {
        x0 = x0.min(p.x_m);
        x1 = x1.max(p.x_m);
        y0 = y0.min(p.y_m);
        y1 = y1.max(p.y_m);
    }
    let span = (x1 - x0).max(y1 - y0).max(1.0) * 1.1;
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let scale = PLOT / span;
    // Meters up on the page.
    let sx = |x: f64| MARGIN + PLOT / 2.0 + (x - cx) * scale;
    let sy = |y: f64| MARGIN + PLOT / 2.0 - (y - cy) * scale;

    let width = PLOT + 2.0 * MARGIN + LEGEND_W;
    let height = PLOT + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        num(width),
        num(height),
        num(width),
        num(height)
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{}" height="{}" fill="white"/>"#, num(width), num(height));
    let _ = writeln!(
        s,
        r#"<rect class="frame" x="{m}" y="{m}" width="{p}" height="{p}" fill="none" stroke="gray"/>"#,
        m = num(MARGIN),
        p = num(PLOT)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">x (m), 1 m = {} px</text>"#,
        num(MARGIN + PLOT / 2.0),
        num(height - 15.0),
        num(scale)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">y (m)</text>"#,
        num(MARGIN + PLOT / 2.0),
        num(MARGIN + PLOT / 2.0)
    );

    for (i, t) in trace.trajectories.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let dash = if t.approximate { r#" stroke-dasharray="6 4""# } else { "" };
        let id = escape(&t.object_id);
        let _ = writeln!(s, r#"<g class="trajectory" data-object="{id}">"#);
        if matches!(style, PlotStyle::Path | PlotStyle::Both) && t.points.len() > 1 {
            let pts: Vec<String> = t.points.iter().map(|p| format!("{},{}", num(sx(p.x_m)), num(sy(p.y_m)))).collect();
            let _ = writeln!(
                s,
                r#"<polyline class="path" data-object="{id}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                pts.join(" ")
            );
        }
        if matches!(style, PlotStyle::Points | PlotStyle::Both) {
            let fill = if t.approximate { "none" } else { color };
            for p in &t.points {
                let _ = writeln!(
                    s,
                    r#"<circle class="glyph" data-object="{id}" data-frame="{}" cx="{}" cy="{}" r="3" fill="{fill}" stroke="{color}"/>"#,
                    p.frame_index,
                    num(sx(p.x_m)),
                    num(sy(p.y_m))
                );
            }
        }
        let _ = writeln!(s, "</g>");
    }

    let (ox, oy) = (sx(0.0), sy(0.0));
    let _ = writeln!(
        s,
        r#"<path class="hit" d="M{} {} L{} {} M{} {} L{} {}" stroke="black" stroke-width="2"/>"#,
        num(ox - 6.0),
        num(oy - 6.0),
        num(ox + 6.0),
        num(oy + 6.0),
        num(ox - 6.0),
        num(oy + 6.0),
        num(ox + 6.0),
        num(oy - 6.0)
    );

    let lx = PLOT + 2.0 * MARGIN;
    let mut ly = MARGIN + 10.0;
    let _ = writeln!(s, r#"<g class="legend">"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12">hit frame {}</text>"#, num(lx), num(ly), trace.hit_frame);
    for (i, t) in trace.trajectories.iter().enumerate() {
        ly += 18.0;
        let color = PALETTE[i % PALETTE.len()];
        let suffix = if t.approximate { " (approx.)" } else { "" };
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}" font-size="12">{}{suffix}</text>"#,
            num(lx),
            num(ly - 9.0),
            num(lx + 16.0),
            num(ly),
            escape(&t.object_id)
        );
    }
    if !trace.events.is_empty() {
        ly += 28.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" font-weight="bold">events</text>"#, num(lx), num(ly));
        for e in &trace.events {
            ly += 16.0;
            let kind = serde_json::to_value(e.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            let note = if e.note.is_empty() { String::new() } else { format!(": {}", escape(&e.note)) };
            let _ = writeln!(
                s,
                r#"<text class="event" x="{}" y="{}" font-size="11">t={}s {kind}{note}</text>"#,
                num(lx),
                num(ly),
                num(e.time_s)
            );
        }
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}
