//! `sealrestore` -- red-seal removal and evaluation for historical document
//! images.
//!
//! Exit codes: 0 on success, 1 when the run had failures (per-item details
//! in the report or manifest), 2 for an invalid invocation.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sealrestore::{OverlayStyle, RestoreParams};

#[derive(Parser)]
#[command(
    name = "sealrestore",
    version,
    about = "Seal removal and evaluation toolkit for historical document images"
)]
struct Cli {
    /// Worker pool size for batch commands; defaults to the logical core
    /// count.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RestoreArgs {
    /// Minimum red-channel intensity for a seal candidate.
    #[arg(long = "tau-r", default_value_t = 90.0)]
    tau_r: f64,
    /// Required red/green dominance ratio.
    #[arg(long = "tau-rg", default_value_t = 1.3)]
    tau_rg: f64,
    /// Required red/blue dominance ratio.
    #[arg(long = "tau-rb", default_value_t = 1.3)]
    tau_rb: f64,
    /// Dilation structuring-element side (odd).
    #[arg(long, default_value_t = 3)]
    kernel: u32,
    /// Dilation iterations; 0 disables mask refinement.
    #[arg(long, default_value_t = 1)]
    iters: u32,
    /// Inpainting radius in pixels.
    #[arg(long, default_value_t = 3.0)]
    radius: f64,
}

impl RestoreArgs {
    fn to_params(&self) -> RestoreParams {
        RestoreParams {
            tau_r: self.tau_r,
            tau_rg: self.tau_rg,
            tau_rb: self.tau_rb,
            kernel: self.kernel,
            iterations: self.iters,
            radius: self.radius,
        }
    }
}

#[derive(Args, Clone)]
struct StyleArgs {
    #[arg(long, default_value = "green")]
    box_color: String,
    #[arg(long, default_value_t = 2)]
    box_stroke_width: u32,
    /// Hide the bounding-box rectangles.
    #[arg(long)]
    no_boxes: bool,
    #[arg(long, default_value = "green")]
    text_color: String,
    /// Overlaid character size in pixels.
    #[arg(long, default_value_t = 64)]
    font_size: u32,
    #[arg(long, default_value = "serif")]
    font_family: String,
}

impl StyleArgs {
    fn to_style(&self) -> OverlayStyle {
        OverlayStyle {
            box_color: self.box_color.clone(),
            box_stroke_width: self.box_stroke_width,
            show_boxes: !self.no_boxes,
            text_color: self.text_color.clone(),
            font_size: self.font_size,
            font_family: self.font_family.clone(),
        }
    }
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seal-overlaid synthetic pages with ground-truth masks.
    Synth {
        /// Directory of clean page images.
        #[arg(long)]
        pages: PathBuf,
        /// Directory of seal template images (red ink on white).
        #[arg(long)]
        templates: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seals per page.
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Base seed; page i uses seed + i.
        #[arg(long)]
        seed: u64,
        /// Seal ink opacity in (0, 1].
        #[arg(long, default_value_t = 0.85)]
        opacity: f64,
        /// Template pixels with min(R,G,B) below this count as ink.
        #[arg(long, default_value_t = 240)]
        ink_threshold: u8,
    },
    /// Detect the seal mask of one image and export it as a PNG.
    Mask {
        #[arg(long)]
        input: PathBuf,
        /// Mask PNG destination (255 = seal).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        restore: RestoreArgs,
    },
    /// Restore one image: seal detection, dilation, inpainting.
    Restore {
        #[arg(long)]
        input: PathBuf,
        /// Receives `<stem>_restored.png`, `<stem>_mask.png`, and
        /// `<stem>_restore.json`.
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        restore: RestoreArgs,
    },
    /// Score restored images against references with PSNR and SSIM.
    Eval {
        /// Restored image file or directory.
        #[arg(long)]
        restored: PathBuf,
        /// Reference image file or directory (directories pair by stem).
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        /// Report destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep channel thresholds over a synthetic/clean suite.
    Sweep {
        /// Directory of synthetic (seal-overlaid) images.
        #[arg(long)]
        synthetic: PathBuf,
        /// Directory of clean references, paired by stem.
        #[arg(long)]
        clean: PathBuf,
        #[arg(long = "tau-r", value_delimiter = ',', default_values_t = [80.0, 90.0])]
        tau_r: Vec<f64>,
        /// Values applied to both tau_rg and tau_rb.
        #[arg(long, value_delimiter = ',', default_values_t = [1.2, 1.3, 1.4, 1.5])]
        ratios: Vec<f64>,
        #[arg(long, default_value_t = 3)]
        kernel: u32,
        #[arg(long, default_value_t = 1)]
        iters: u32,
        #[arg(long, default_value_t = 3.0)]
        radius: f64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Match predictions against ground truth and report totals.
    Match {
        /// Ground-truth CSV file or directory of per-image CSVs.
        #[arg(long)]
        gt: PathBuf,
        /// Predictions JSON-lines file.
        #[arg(long)]
        pred: PathBuf,
        /// IoU threshold for a pair to count as matched.
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// Confidence threshold (strictly greater keeps a detection).
        #[arg(long, default_value_t = 0.5)]
        conf: f64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        format: OutputFormat,
    },
    /// Crop character patches from an image using predictions.
    Crop {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Prediction image id; defaults to the image file stem.
        #[arg(long)]
        image_id: Option<String>,
        #[arg(long, default_value_t = 0.5)]
        conf: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Render the recognized-character SVG overlay for one image.
    Overlay {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Prediction image id; defaults to the image file stem.
        #[arg(long)]
        image_id: Option<String>,
        #[arg(long, default_value_t = 0.5)]
        conf: f64,
        /// Embed the image as a base64 data URI instead of a relative href.
        #[arg(long)]
        embed: bool,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        style: StyleArgs,
    },
    /// Full run over a directory: restore, crop, overlay, manifest.
    Pipeline {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Predictions JSON-lines file.
        #[arg(long)]
        pred: Option<PathBuf>,
        /// Ground-truth CSV directory; adds match counts to the manifest.
        #[arg(long)]
        gt: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        conf: f64,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        #[command(flatten)]
        restore: RestoreArgs,
        #[command(flatten)]
        style: StyleArgs,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SEALRESTORE_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: cannot size the worker pool: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<commands::InvalidInvocation>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
