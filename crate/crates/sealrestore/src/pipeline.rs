//! Batch orchestration: parameter sweeps, ground-truth matching, and the
//! end-to-end restore / crop / overlay run.
//!
//! Detection and classification models stay outside the toolkit; their
//! outputs enter as prediction files (see [`crate::annot`]). Every entry
//! point here is deterministic given identical inputs and flags, and batch
//! work never mutates its inputs -- all writes land in the output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annot::{
    format_codepoint, parse_ground_truth_csv, parse_predictions_jsonl, AnnotError, MatchReport,
};
use crate::boxes::{crop, filter_by_confidence, match_boxes, Detection, GroundTruth};
use crate::inpaint::{restore_document, RestoreError};
use crate::mask::RestoreParams;
use crate::metrics::{evaluate_pair, MetricsReport, PairMetrics};
use crate::overlay::{render_overlay, OverlayStyle};
use crate::raster::{Image, ImageError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("{}: {source}", path.display())]
    Annot {
        path: PathBuf,
        #[source]
        source: AnnotError,
    },
    #[error(transparent)]
    Restore(#[from] RestoreError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Lists the PNG/JPEG files directly inside `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let ext = path
            .extension()
            .map(|e| e.to_string_lossy().to_ascii_lowercase());
        if matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned())
}

/// Builds (restored, reference) pairs from two files or two directories;
/// directories pair up files sharing a stem.
pub fn pair_images(
    restored: &Path,
    reference: &Path,
) -> Result<Vec<(PathBuf, PathBuf)>, PipelineError> {
    match (restored.is_dir(), reference.is_dir()) {
        (false, false) => Ok(vec![(restored.to_path_buf(), reference.to_path_buf())]),
        (true, true) => {
            let refs: BTreeMap<String, PathBuf> = list_images(reference)?
                .into_iter()
                .map(|p| (stem_of(&p), p))
                .collect();
            Ok(list_images(restored)?
                .into_iter()
                .filter_map(|p| refs.get(&stem_of(&p)).map(|r| (p.clone(), r.clone())))
                .collect())
        }
        _ => Err(PipelineError::InvalidConfig(
            "restored and reference must both be files or both be directories".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// Parameter sweep
// ---------------------------------------------------------------------------

/// Grid of channel thresholds swept with fixed kernel / iteration / radius
/// settings; each ratio value is applied to both tau_rg and tau_rb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub tau_r_values: Vec<f64>,
    pub ratio_values: Vec<f64>,
    pub base: RestoreParams,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            tau_r_values: vec![80.0, 90.0],
            ratio_values: vec![1.2, 1.3, 1.4, 1.5],
            base: RestoreParams::default(),
        }
    }
}

/// Mean scores for one grid cell; the no-restoration baseline row leaves
/// `tau_r` and `ratio` empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau_r: Option<f64>,
    pub ratio: Option<f64>,
    pub mean_psnr_db: Option<f64>,
    pub infinite_psnr_count: usize,
    pub mean_ssim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub baseline: SweepRow,
    pub cells: Vec<SweepRow>,
    /// `(tau_r, ratio)` of the cell with the highest mean PSNR.
    pub best_cell: Option<(f64, f64)>,
}

fn mean_row(tau_r: Option<f64>, ratio: Option<f64>, scores: Vec<(f64, f64)>) -> SweepRow {
    let rows: Vec<PairMetrics> = scores
        .into_iter()
        .enumerate()
        .map(|(i, (p, s))| PairMetrics {
            image_id: i.to_string(),
            psnr_db: p.is_finite().then_some(p),
            ssim: s,
        })
        .collect();
    let agg = MetricsReport::from_rows(rows, Vec::new());
    SweepRow {
        tau_r,
        ratio,
        mean_psnr_db: agg.mean_psnr_db,
        infinite_psnr_count: agg.infinite_psnr_count,
        mean_ssim: agg.mean_ssim,
    }
}

/// Restores every synthetic image under each `(tau_r, ratio)` cell and
/// scores it against its clean reference; the first row reports the
/// no-restoration baseline computed directly between the pairs.
pub fn run_sweep(
    grid: &SweepGrid,
    pairs: &[(PathBuf, PathBuf)],
) -> Result<SweepReport, PipelineError> {
    grid.base
        .validate()
        .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
    let loaded: Vec<(Image, Image)> = pairs
        .iter()
        .map(|(synthetic, clean)| Ok((Image::load(synthetic)?, Image::load(clean)?)))
        .collect::<Result<_, ImageError>>()?;

    let score_pair = |synthetic: &Image, clean: &Image| -> Result<(f64, f64), PipelineError> {
        evaluate_pair(synthetic, clean).map_err(|e| PipelineError::InvalidConfig(e.to_string()))
    };

    let baseline_scores = loaded
        .iter()
        .map(|(synthetic, clean)| score_pair(synthetic, clean))
        .collect::<Result<Vec<_>, _>>()?;
    let baseline = mean_row(None, None, baseline_scores);

    let mut cells = Vec::new();
    for &tau_r in &grid.tau_r_values {
        for &ratio in &grid.ratio_values {
            let params = RestoreParams {
                tau_r,
                tau_rg: ratio,
                tau_rb: ratio,
                ..grid.base.clone()
            };
            log::info!("sweep cell tau_r={tau_r} ratio={ratio}");
            let scores = loaded
                .par_iter()
                .map(|(synthetic, clean)| {
                    let (restored, _) = restore_document(synthetic, &params)?;
                    score_pair(&restored, clean)
                })
                .collect::<Result<Vec<_>, _>>()?;
            cells.push(mean_row(Some(tau_r), Some(ratio), scores));
        }
    }

    // Ties keep the first (lowest-threshold) cell in grid order.
    let mut best_cell: Option<((f64, f64), f64)> = None;
    for (cell, score) in cells
        .iter()
        .filter_map(|c| Some(((c.tau_r?, c.ratio?), c.mean_psnr_db?)))
    {
        if best_cell.is_none_or(|(_, top)| score > top) {
            best_cell = Some((cell, score));
        }
    }
    let best_cell = best_cell.map(|(cell, _)| cell);

    Ok(SweepReport {
        baseline,
        cells,
        best_cell,
    })
}

/// CSV table with one row per cell after the baseline row, columns
/// `tau_r,ratio,psnr_db,ssim`.
pub fn sweep_to_csv(report: &SweepReport) -> String {
    let fmt_mean = |v: Option<f64>| match v {
        Some(v) => format!("{v:.4}"),
        None => "--".to_string(),
    };
    let fmt_axis = |v: Option<f64>| match v {
        Some(v) => format!("{v}"),
        None => "--".to_string(),
    };
    let mut out = String::from("tau_r,ratio,psnr_db,ssim\n");
    for row in std::iter::once(&report.baseline).chain(&report.cells) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_axis(row.tau_r),
            fmt_axis(row.ratio),
            fmt_mean(row.mean_psnr_db),
            fmt_mean(row.mean_ssim),
        ));
    }
    out
}

// ---------------------------------------------------------------------------
// Ground-truth matching
// ---------------------------------------------------------------------------

fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruth>, PipelineError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    parse_ground_truth_csv(&bytes).map_err(|source| PipelineError::Annot {
        path: path.to_path_buf(),
        source,
    })
}

fn load_predictions(path: &Path) -> Result<BTreeMap<String, Vec<Detection>>, PipelineError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let mut grouped: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for pred in parse_predictions_jsonl(&bytes).map_err(|source| PipelineError::Annot {
        path: path.to_path_buf(),
        source,
    })? {
        grouped
            .entry(pred.image_id)
            .or_default()
            .push(pred.detection);
    }
    Ok(grouped)
}

/// Aggregates matched-pair totals across a test set.
///
/// `gt_path` is a single CSV file or a directory of them (one per image,
/// keyed by file stem); predictions are confidence-filtered before
/// matching. Predicted totals count every surviving detection in the file,
/// matched totals only pair where ground truth exists.
pub fn run_match(
    gt_path: &Path,
    pred_path: &Path,
    iou_threshold: f64,
    confidence_threshold: f64,
) -> Result<MatchReport, PipelineError> {
    let gt_files: Vec<PathBuf> = if gt_path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(gt_path)
            .map_err(io_err(gt_path))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        files.sort();
        files
    } else {
        vec![gt_path.to_path_buf()]
    };

    let predictions = load_predictions(pred_path)?;
    let filtered: BTreeMap<&String, Vec<Detection>> = predictions
        .iter()
        .map(|(id, dets)| (id, filter_by_confidence(dets, confidence_threshold)))
        .collect();

    let mut report = MatchReport {
        images: gt_files.len(),
        total_ground_truth: 0,
        total_predicted: filtered.values().map(Vec::len).sum(),
        total_matched: 0,
    };
    for file in &gt_files {
        let gt = load_ground_truth(file)?;
        report.total_ground_truth += gt.len();
        let id = stem_of(file);
        if let Some(dets) = filtered.get(&id) {
            report.total_matched += match_boxes(&gt, dets, iou_threshold).pairs.len();
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// End-to-end run
// ---------------------------------------------------------------------------

/// Inputs and knobs for one end-to-end run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Detector/classifier output consumed as a file (JSON lines).
    pub predictions: Option<PathBuf>,
    /// Optional per-image ground-truth CSV directory; enables match counts
    /// in the manifest.
    pub gt_dir: Option<PathBuf>,
    pub params: RestoreParams,
    pub confidence_threshold: f64,
    pub iou_threshold: f64,
    pub style: OverlayStyle,
}

impl PipelineConfig {
    pub fn new(input_dir: PathBuf, output_dir: PathBuf) -> Self {
        Self {
            input_dir,
            output_dir,
            predictions: None,
            gt_dir: None,
            params: RestoreParams::default(),
            confidence_threshold: 0.5,
            iou_threshold: 0.5,
            style: OverlayStyle::default(),
        }
    }
}

/// Per-image match counts recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub ground_truth: usize,
    pub predicted: usize,
    pub matched: usize,
}

/// Outcome of one image within a run. Paths are relative to the output
/// directory; `restore_seconds` is wall-clock and excluded from
/// reproducibility comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRunRecord {
    pub image_id: String,
    pub input: PathBuf,
    pub outputs: Vec<PathBuf>,
    pub mask_coverage: f64,
    pub restore_seconds: f64,
    pub crops: usize,
    pub match_counts: Option<MatchCounts>,
    pub errors: Vec<String>,
}

/// Machine-readable record of a full run: the configuration it ran with
/// plus per-image outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// Raw hardware context for the recorded wall-clock timings.
    pub machine: String,
    pub config: PipelineConfig,
    pub images: Vec<ImageRunRecord>,
}

/// OS, architecture, and logical core count of the running host.
pub fn machine_description() -> String {
    let cores = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    format!(
        "{} {} ({} logical cores)",
        std::env::consts::OS,
        std::env::consts::ARCH,
        cores
    )
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }

    pub fn has_errors(&self) -> bool {
        self.images.iter().any(|r| !r.errors.is_empty())
    }
}

fn process_image(
    cfg: &PipelineConfig,
    input: &Path,
    predictions: &BTreeMap<String, Vec<Detection>>,
) -> ImageRunRecord {
    let image_id = stem_of(input);
    let mut record = ImageRunRecord {
        image_id: image_id.clone(),
        input: input.to_path_buf(),
        outputs: Vec::new(),
        mask_coverage: 0.0,
        restore_seconds: 0.0,
        crops: 0,
        match_counts: None,
        errors: Vec::new(),
    };

    let img = match Image::load(input) {
        Ok(img) => img,
        Err(e) => {
            record.errors.push(e.to_string());
            return record;
        }
    };
    let started = Instant::now();
    let (restored, mask) = match restore_document(&img, &cfg.params) {
        Ok(r) => r,
        Err(e) => {
            record.errors.push(e.to_string());
            return record;
        }
    };
    record.restore_seconds = started.elapsed().as_secs_f64();
    record.mask_coverage = mask.coverage();
    log::debug!(
        "{image_id}: restored in {:.3}s, mask coverage {:.4}",
        record.restore_seconds,
        record.mask_coverage
    );

    let restored_name = PathBuf::from(format!("{image_id}_restored.png"));
    let mask_name = PathBuf::from(format!("{image_id}_mask.png"));
    if let Err(e) = restored.save(cfg.output_dir.join(&restored_name)) {
        record.errors.push(e.to_string());
        return record;
    }
    record.outputs.push(restored_name.clone());
    if let Err(e) = mask.save_png(cfg.output_dir.join(&mask_name)) {
        record.errors.push(e.to_string());
    } else {
        record.outputs.push(mask_name);
    }

    let kept = predictions
        .get(&image_id)
        .map(|dets| filter_by_confidence(dets, cfg.confidence_threshold))
        .unwrap_or_default();

    for (i, det) in kept.iter().enumerate() {
        let label = det
            .label
            .map(format_codepoint)
            .unwrap_or_else(|| "unlabeled".to_string());
        let crop_name = PathBuf::from(format!("crops/{image_id}/{i:04}_{label}.png"));
        match crop(&restored, &det.bbox) {
            Ok(patch) => {
                let full = cfg.output_dir.join(&crop_name);
                let write = full
                    .parent()
                    .map(std::fs::create_dir_all)
                    .transpose()
                    .map_err(|e| e.to_string())
                    .and_then(|_| patch.save(&full).map_err(|e| e.to_string()));
                match write {
                    Ok(()) => {
                        record.outputs.push(crop_name);
                        record.crops += 1;
                    }
                    Err(e) => record.errors.push(format!("crop {i}: {e}")),
                }
            }
            Err(e) => record.errors.push(format!("crop {i}: {e}")),
        }
    }

    let items: Vec<_> = kept
        .iter()
        .filter_map(|d| d.label.map(|c| (d.bbox, c.to_string())))
        .collect();
    if !items.is_empty() {
        let href = format!("{image_id}_restored.png");
        match render_overlay(
            &href,
            restored.width(),
            restored.height(),
            &items,
            &cfg.style,
        ) {
            Ok(svg) => {
                let svg_name = PathBuf::from(format!("{image_id}_overlay.svg"));
                match std::fs::write(cfg.output_dir.join(&svg_name), svg) {
                    Ok(()) => record.outputs.push(svg_name),
                    Err(e) => record.errors.push(e.to_string()),
                }
            }
            Err(e) => record.errors.push(e.to_string()),
        }
    }

    if let Some(gt_dir) = &cfg.gt_dir {
        let gt_file = gt_dir.join(format!("{image_id}.csv"));
        if gt_file.exists() {
            match load_ground_truth(&gt_file) {
                Ok(gt) => {
                    let m = match_boxes(&gt, &kept, cfg.iou_threshold);
                    record.match_counts = Some(MatchCounts {
                        ground_truth: gt.len(),
                        predicted: kept.len(),
                        matched: m.pairs.len(),
                    });
                }
                Err(e) => record.errors.push(e.to_string()),
            }
        }
    }

    record
}

/// Runs restore -> filter -> crop -> overlay over every image in the input
/// directory and writes `manifest.json` describing the run.
///
/// Per-image failures are recorded in the manifest and do not abort the
/// run; input files are never modified.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunManifest, PipelineError> {
    cfg.params
        .validate()
        .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    let input_canon = cfg
        .input_dir
        .canonicalize()
        .map_err(io_err(&cfg.input_dir))?;
    let output_canon = cfg
        .output_dir
        .canonicalize()
        .map_err(io_err(&cfg.output_dir))?;
    if input_canon == output_canon {
        return Err(PipelineError::InvalidConfig(
            "output directory must be distinct from the input directory".into(),
        ));
    }

    let predictions = match &cfg.predictions {
        Some(path) => load_predictions(path)?,
        None => BTreeMap::new(),
    };
    let inputs = list_images(&cfg.input_dir)?;
    log::info!("pipeline over {} images", inputs.len());

    let images: Vec<ImageRunRecord> = inputs
        .par_iter()
        .map(|input| process_image(cfg, input, &predictions))
        .collect();

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        machine: machine_description(),
        config: cfg.clone(),
        images,
    };
    std::fs::write(cfg.output_dir.join("manifest.json"), manifest.to_json())
        .map_err(io_err(&cfg.output_dir))?;
    Ok(manifest)
}
