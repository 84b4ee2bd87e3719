//! SVG overlay rendering: restored page plus detection boxes and recognized
//! modern characters.
//!
//! Output is vector SVG rather than rasterized text, so no CJK font ships
//! with the toolkit and style toggles stay byte-for-byte testable. The base
//! image is referenced by `href`; callers wanting a self-contained file pass
//! a `data:` URI instead of a relative path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boxes::BBox;

#[derive(Debug, Error)]
pub enum OverlayError {
    #[error("canvas dimensions must be positive")]
    EmptyCanvas,
}

/// Visual style for boxes and characters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayStyle {
    pub box_color: String,
    pub box_stroke_width: u32,
    pub show_boxes: bool,
    pub text_color: String,
    /// Character size in pixels.
    pub font_size: u32,
    /// Advisory; the viewer supplies the actual font.
    pub font_family: String,
}

impl Default for OverlayStyle {
    fn default() -> Self {
        Self {
            box_color: "green".to_string(),
            box_stroke_width: 2,
            show_boxes: true,
            text_color: "green".to_string(),
            font_size: 64,
            font_family: "serif".to_string(),
        }
    }
}

fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            other => out.push(other),
        }
    }
    out
}

/// Renders the overlay document: image base layer, one rectangle per item
/// when boxes are shown, and one text element per item anchored at the box's
/// top-left corner (baseline shifted down by the font size).
///
/// Element order follows input order and the output is deterministic
/// byte-for-byte for fixed inputs.
pub fn render_overlay(
    image_href: &str,
    width: u32,
    height: u32,
    items: &[(BBox, String)],
    style: &OverlayStyle,
) -> Result<String, OverlayError> {
    if width == 0 || height == 0 {
        return Err(OverlayError::EmptyCanvas);
    }
    assert!(style.font_size > 0, "font size must be positive");
    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n",
    ));
    svg.push_str(&format!(
        "  <image href=\"{}\" x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\"/>\n",
        escape_xml(image_href),
    ));
    for (bbox, text) in items {
        if style.show_boxes {
            svg.push_str(&format!(
                "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>\n",
                bbox.x,
                bbox.y,
                bbox.w,
                bbox.h,
                escape_xml(&style.box_color),
                style.box_stroke_width,
            ));
        }
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" fill=\"{}\" font-size=\"{}\" font-family=\"{}\">{}</text>\n",
            bbox.x,
            bbox.y + style.font_size as i64,
            escape_xml(&style.text_color),
            style.font_size,
            escape_xml(&style.font_family),
            escape_xml(text),
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
