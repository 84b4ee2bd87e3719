//! Annotation file formats.
//!
//! Two external formats enter the toolkit here, both treated as untrusted
//! input: ground-truth CSV files (header `unicode,x,y,w,h`, code points as
//! `U+XXXX` hex) and detector predictions as JSON lines. Parse errors carry
//! the offending line number and never panic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boxes::{BBox, Detection, GroundTruth};

#[derive(Debug, Error)]
pub enum AnnotError {
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("missing or wrong header; expected `unicode,x,y,w,h`")]
    BadHeader,
}

fn malformed(line: u64, msg: impl Into<String>) -> AnnotError {
    AnnotError::Malformed {
        line,
        msg: msg.into(),
    }
}

/// Parses a `U+XXXX` hex code-point literal into its character.
pub fn parse_codepoint(s: &str) -> Result<char, String> {
    let hex = s
        .strip_prefix("U+")
        .or_else(|| s.strip_prefix("u+"))
        .ok_or_else(|| format!("expected U+XXXX code point, got {s:?}"))?;
    if hex.is_empty() || hex.len() > 6 {
        return Err(format!("expected 1-6 hex digits in {s:?}"));
    }
    let cp = u32::from_str_radix(hex, 16).map_err(|_| format!("bad hex digits in {s:?}"))?;
    char::from_u32(cp).ok_or_else(|| format!("U+{cp:04X} is not a Unicode scalar value"))
}

/// Formats a character as an uppercase `U+XXXX` literal (at least 4 digits).
pub fn format_codepoint(c: char) -> String {
    format!("U+{:04X}", c as u32)
}

/// Parses a CODH-style ground-truth CSV: header `unicode,x,y,w,h`, integer
/// pixel coordinates, positive extents.
pub fn parse_ground_truth_csv(bytes: &[u8]) -> Result<Vec<GroundTruth>, AnnotError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    {
        let headers = reader.headers().map_err(|e| match e.position() {
            Some(p) => malformed(p.line(), e.to_string()),
            None => AnnotError::BadHeader,
        })?;
        let expected = ["unicode", "x", "y", "w", "h"];
        if headers.len() != expected.len()
            || headers.iter().zip(expected).any(|(got, want)| got != want)
        {
            return Err(AnnotError::BadHeader);
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            malformed(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 5 {
            return Err(malformed(
                line,
                format!("expected 5 fields, got {}", record.len()),
            ));
        }
        let codepoint = parse_codepoint(&record[0]).map_err(|msg| malformed(line, msg))?;
        let mut nums = [0i64; 4];
        for (slot, field) in nums.iter_mut().zip(record.iter().skip(1)) {
            *slot = field
                .parse()
                .map_err(|_| malformed(line, format!("expected integer, got {field:?}")))?;
        }
        let [x, y, w, h] = nums;
        if w <= 0 || h <= 0 {
            return Err(malformed(
                line,
                format!("box extent must be positive, got {w}x{h}"),
            ));
        }
        rows.push(GroundTruth {
            bbox: BBox { x, y, w, h },
            codepoint,
        });
    }
    Ok(rows)
}

/// One prediction-file record: a detection tagged with the page it belongs
/// to.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub image_id: String,
    pub detection: Detection,
}

#[derive(Deserialize)]
struct PredictionRecord {
    image_id: String,
    x: i64,
    y: i64,
    w: i64,
    h: i64,
    confidence: f64,
    #[serde(default)]
    unicode: Option<String>,
}

/// Parses detector output as JSON lines, one object per detection:
/// `{"image_id", "x", "y", "w", "h", "confidence", "unicode"?}`.
/// Blank lines are skipped; unknown fields are ignored.
pub fn parse_predictions_jsonl(bytes: &[u8]) -> Result<Vec<Prediction>, AnnotError> {
    let mut out = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = i as u64 + 1;
        let raw = if raw.last() == Some(&b'\r') {
            &raw[..raw.len() - 1]
        } else {
            raw
        };
        if raw.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let text = std::str::from_utf8(raw).map_err(|_| malformed(line, "invalid UTF-8"))?;
        let record: PredictionRecord =
            serde_json::from_str(text).map_err(|e| malformed(line, e.to_string()))?;
        if record.w <= 0 || record.h <= 0 {
            return Err(malformed(
                line,
                format!("box extent must be positive, got {}x{}", record.w, record.h),
            ));
        }
        if !(0.0..=1.0).contains(&record.confidence) {
            return Err(malformed(
                line,
                format!("confidence must be in [0, 1], got {}", record.confidence),
            ));
        }
        let label = record
            .unicode
            .as_deref()
            .map(parse_codepoint)
            .transpose()
            .map_err(|msg| malformed(line, msg))?;
        out.push(Prediction {
            image_id: record.image_id,
            detection: Detection {
                bbox: BBox {
                    x: record.x,
                    y: record.y,
                    w: record.w,
                    h: record.h,
                },
                confidence: record.confidence,
                label,
            },
        });
    }
    Ok(out)
}

/// Aggregate matching totals across a test set, one row per run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchReport {
    /// Number of images carrying ground-truth annotations.
    pub images: usize,
    pub total_ground_truth: usize,
    /// Predicted boxes surviving the confidence filter.
    pub total_predicted: usize,
    /// One-to-one pairs at or above the IoU threshold.
    pub total_matched: usize,
}
