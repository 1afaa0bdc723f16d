//! Labeled scatter plots as self-contained SVG, plus coordinate CSV output.
//!
//! Points are min-max scaled into the viewport with a 5% margin; one color
//! per distinct label, assigned by sorted label order so the palette is
//! stable across runs. Output bytes are deterministic: fixed decimal
//! formatting, sorted legend.

use std::collections::BTreeSet;
use std::path::Path;

use super::VizError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 500.0;
const LEGEND_WIDTH: f64 = 150.0;

/// A qualitative palette; labels beyond its length cycle.
const PALETTE: [&str; 12] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
];

fn io_err(path: &Path, source: std::io::Error) -> VizError {
    VizError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes an SVG scatter of `coords` colored by label, with a legend.
pub fn emit_scatter(
    coords: &[[f64; 2]],
    labels: &[String],
    path: impl AsRef<Path>,
) -> Result<(), VizError> {
    if coords.is_empty() {
        return Err(VizError::NoPoints);
    }
    if coords.len() != labels.len() {
        return Err(VizError::LabelMismatch {
            coords: coords.len(),
            labels: labels.len(),
        });
    }

    let distinct: Vec<String> = labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let color_of = |label: &str| {
        let index = distinct
            .iter()
            .position(|l| l == label)
            .expect("label in distinct set");
        PALETTE[index % PALETTE.len()]
    };

    let plot_width = WIDTH - LEGEND_WIDTH;
    let margin_x = plot_width * 0.05;
    let margin_y = HEIGHT * 0.05;

    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for c in coords {
        min_x = min_x.min(c[0]);
        max_x = max_x.max(c[0]);
        min_y = min_y.min(c[1]);
        max_y = max_y.max(c[1]);
    }
    let span = |min: f64, max: f64| if max > min { max - min } else { 1.0 };
    let span_x = span(min_x, max_x);
    let span_y = span(min_y, max_y);

    let to_px = |c: &[f64; 2]| {
        let x = margin_x + (c[0] - min_x) / span_x * (plot_width - 2.0 * margin_x);
        // SVG y grows downward; flip so larger y plots higher.
        let y = margin_y + (max_y - c[1]) / span_y * (HEIGHT - 2.0 * margin_y);
        (x, y)
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    for (c, label) in coords.iter().zip(labels) {
        let (x, y) = to_px(c);
        svg.push_str(&format!(
            "  <circle class=\"pt\" cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"{}\" fill-opacity=\"0.75\"/>\n",
            color_of(label)
        ));
    }
    // Legend: one entry per distinct label, sorted.
    for (i, label) in distinct.iter().enumerate() {
        let x = plot_width + 10.0;
        let y = 20.0 + i as f64 * 22.0;
        svg.push_str(&format!(
            "  <g class=\"legend-entry\"><rect x=\"{x:.2}\" y=\"{:.2}\" width=\"12\" height=\"12\" fill=\"{}\"/><text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\">{}</text></g>\n",
            y - 10.0,
            color_of(label),
            x + 18.0,
            y,
            escape_xml(label),
        ));
    }
    svg.push_str("</svg>\n");

    std::fs::write(path.as_ref(), svg).map_err(|e| io_err(path.as_ref(), e))
}

fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Writes `recording_id,x,y,label` rows for downstream plotting.
pub fn write_coords_csv(
    ids: &[String],
    coords: &[[f64; 2]],
    labels: &[String],
    path: impl AsRef<Path>,
) -> Result<(), VizError> {
    if coords.len() != labels.len() || coords.len() != ids.len() {
        return Err(VizError::LabelMismatch {
            coords: coords.len(),
            labels: labels.len(),
        });
    }
    let mut out = String::from("recording_id,x,y,label\n");
    for ((id, c), label) in ids.iter().zip(coords).zip(labels) {
        out.push_str(&format!("{id},{},{},{label}\n", c[0], c[1]));
    }
    std::fs::write(path.as_ref(), out).map_err(|e| io_err(path.as_ref(), e))
}
