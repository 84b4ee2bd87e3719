//! Subcommand implementations.

use std::fmt;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use base64::Engine;
use rayon::prelude::*;
use sealrestore::annot::parse_predictions_jsonl;
use sealrestore::boxes::{crop, filter_by_confidence, Detection};
use sealrestore::mask::dilate;
use sealrestore::pipeline::{
    list_images, pair_images, run_match, run_pipeline, run_sweep, sweep_to_csv, PipelineConfig,
    SweepGrid,
};
use sealrestore::synth::{generate_synthetic, SealPlacement, SealTemplate};
use sealrestore::{
    detect_seal_mask, evaluate_set, render_overlay, restore_document, Image, RestoreParams,
};

use crate::{Command, OutputFormat};

/// Marker for exit code 2: the invocation itself was wrong (bad parameter
/// combinations, malformed values), as opposed to runtime failures.
#[derive(Debug)]
pub struct InvalidInvocation(String);

impl fmt::Display for InvalidInvocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl std::error::Error for InvalidInvocation {}

fn validate(params: &RestoreParams) -> Result<()> {
    params
        .validate()
        .map_err(|e| anyhow!(InvalidInvocation(e.to_string())))
}

fn check(ok: bool, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(anyhow!(InvalidInvocation(msg.to_string())))
    }
}

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned())
}

fn load_detections_for(pred: &Path, image_id: &str, conf: f64) -> Result<Vec<Detection>> {
    let bytes = std::fs::read(pred).with_context(|| format!("reading {}", pred.display()))?;
    let all = parse_predictions_jsonl(&bytes)
        .map_err(|e| anyhow!(InvalidInvocation(format!("{}: {e}", pred.display()))))?;
    let dets: Vec<Detection> = all
        .into_iter()
        .filter(|p| p.image_id == image_id)
        .map(|p| p.detection)
        .collect();
    Ok(filter_by_confidence(&dets, conf))
}

pub fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Synth {
            pages,
            templates,
            out,
            n,
            seed,
            opacity,
            ink_threshold,
        } => cmd_synth(&pages, &templates, &out, n, seed, opacity, ink_threshold),
        Command::Mask {
            input,
            out,
            restore,
        } => cmd_mask(&input, &out, &restore.to_params()),
        Command::Restore {
            input,
            out_dir,
            restore,
        } => cmd_restore(&input, &out_dir, &restore.to_params()),
        Command::Eval {
            restored,
            reference,
            format,
            out,
        } => cmd_eval(&restored, &reference, format, out.as_deref()),
        Command::Sweep {
            synthetic,
            clean,
            tau_r,
            ratios,
            kernel,
            iters,
            radius,
            format,
            out,
        } => {
            let grid = SweepGrid {
                tau_r_values: tau_r,
                ratio_values: ratios,
                base: RestoreParams {
                    kernel,
                    iterations: iters,
                    radius,
                    ..RestoreParams::default()
                },
            };
            cmd_sweep(&synthetic, &clean, grid, format, out.as_deref())
        }
        Command::Match {
            gt,
            pred,
            iou,
            conf,
            format,
        } => cmd_match(&gt, &pred, iou, conf, format),
        Command::Crop {
            image,
            pred,
            image_id,
            conf,
            out_dir,
        } => cmd_crop(&image, &pred, image_id.as_deref(), conf, &out_dir),
        Command::Overlay {
            image,
            pred,
            image_id,
            conf,
            embed,
            out,
            style,
        } => cmd_overlay(
            &image,
            &pred,
            image_id.as_deref(),
            conf,
            embed,
            &out,
            style.to_style(),
        ),
        Command::Pipeline {
            input,
            out,
            pred,
            gt,
            conf,
            iou,
            restore,
            style,
        } => {
            let cfg = PipelineConfig {
                input_dir: input,
                output_dir: out,
                predictions: pred,
                gt_dir: gt,
                params: restore.to_params(),
                confidence_threshold: conf,
                iou_threshold: iou,
                style: style.to_style(),
            };
            cmd_pipeline(cfg)
        }
    }
}

#[derive(serde::Serialize)]
struct SynthPageReport {
    page: String,
    seed: u64,
    seals: usize,
    opacity: f64,
    placements: Vec<SealPlacement>,
}

fn cmd_synth(
    pages: &Path,
    templates_dir: &Path,
    out: &Path,
    n: usize,
    seed: u64,
    opacity: f64,
    ink_threshold: u8,
) -> Result<ExitCode> {
    check(
        opacity > 0.0 && opacity <= 1.0,
        "--opacity must be in (0, 1]",
    )?;
    let template_files = list_images(templates_dir)?;
    check(
        n == 0 || !template_files.is_empty(),
        "--templates directory contains no images",
    )?;
    let templates = template_files
        .iter()
        .map(|p| Ok(SealTemplate::from_image(Image::load(p)?, ink_threshold)))
        .collect::<Result<Vec<_>>>()?;
    let page_files = list_images(pages)?;
    check(
        !page_files.is_empty(),
        "--pages directory contains no images",
    )?;
    let synth_dir = out.join("synthetic");
    let mask_dir = out.join("masks");
    let placement_dir = out.join("placements");
    for dir in [&synth_dir, &mask_dir, &placement_dir] {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    let results: Vec<Result<()>> = page_files
        .par_iter()
        .enumerate()
        .map(|(i, page_path)| {
            let stem = stem_of(page_path);
            let page_seed = seed + i as u64;
            let page = Image::load(page_path)?;
            let (synthetic, placements, mask) =
                generate_synthetic(&page, &templates, n, page_seed, opacity)?;
            synthetic.save(synth_dir.join(format!("{stem}.png")))?;
            mask.save_png(mask_dir.join(format!("{stem}.png")))?;
            let report = SynthPageReport {
                page: stem.clone(),
                seed: page_seed,
                seals: placements.len(),
                opacity,
                placements,
            };
            std::fs::write(
                placement_dir.join(format!("{stem}.json")),
                serde_json::to_string_pretty(&report)?,
            )?;
            log::info!("synthesized {stem} with seed {page_seed}");
            Ok(())
        })
        .collect();

    let mut failures = 0;
    for (path, result) in page_files.iter().zip(results) {
        if let Err(e) = result {
            eprintln!("{}: {e:#}", path.display());
            failures += 1;
        }
    }
    println!(
        "synthesized {} pages into {}",
        page_files.len() - failures,
        out.display()
    );
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_mask(input: &Path, out: &Path, params: &RestoreParams) -> Result<ExitCode> {
    validate(params)?;
    let img = Image::load(input)?;
    let mask = dilate(
        &detect_seal_mask(&img, params),
        params.kernel,
        params.iterations,
    )?;
    mask.save_png(out)?;
    println!(
        "{}",
        serde_json::json!({
            "input": input,
            "mask": out,
            "mask_coverage": mask.coverage(),
            "seal_pixels": mask.count(),
        })
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_restore(input: &Path, out_dir: &Path, params: &RestoreParams) -> Result<ExitCode> {
    validate(params)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let stem = stem_of(input);
    let img = Image::load(input)?;
    let started = Instant::now();
    let (restored, mask) = restore_document(&img, params)?;
    let seconds = started.elapsed().as_secs_f64();
    let restored_path = out_dir.join(format!("{stem}_restored.png"));
    let mask_path = out_dir.join(format!("{stem}_mask.png"));
    restored.save(&restored_path)?;
    mask.save_png(&mask_path)?;
    let summary = serde_json::json!({
        "input": input,
        "restored": restored_path,
        "mask": mask_path,
        "params": params,
        "mask_coverage": mask.coverage(),
        "restore_seconds": seconds,
    });
    std::fs::write(
        out_dir.join(format!("{stem}_restore.json")),
        serde_json::to_string_pretty(&summary)?,
    )?;
    println!("{summary}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(
    restored: &Path,
    reference: &Path,
    format: OutputFormat,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let pairs = pair_images(restored, reference)?;
    check(!pairs.is_empty(), "no (restored, reference) pairs found")?;
    let report = evaluate_set(&pairs);
    let content = match format {
        OutputFormat::Csv => report.to_csv(),
        OutputFormat::Json => format!("{}\n", serde_json::to_string_pretty(&report)?),
    };
    emit(out, &content)?;
    for failure in &report.failures {
        eprintln!("{}: {}", failure.image_id, failure.error);
    }
    Ok(if report.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_sweep(
    synthetic: &Path,
    clean: &Path,
    grid: SweepGrid,
    format: OutputFormat,
    out: Option<&Path>,
) -> Result<ExitCode> {
    validate(&grid.base)?;
    check(
        !grid.tau_r_values.is_empty() && !grid.ratio_values.is_empty(),
        "--tau-r and --ratios must be non-empty",
    )?;
    check(
        grid.ratio_values.iter().all(|&r| r >= 1.0),
        "--ratios must all be >= 1",
    )?;
    let pairs = pair_images(synthetic, clean)?;
    check(!pairs.is_empty(), "no (synthetic, clean) pairs found")?;
    let report = run_sweep(&grid, &pairs)?;
    let content = match format {
        OutputFormat::Csv => sweep_to_csv(&report),
        OutputFormat::Json => format!("{}\n", serde_json::to_string_pretty(&report)?),
    };
    emit(out, &content)?;
    if let Some((tau_r, ratio)) = report.best_cell {
        eprintln!("best cell by mean PSNR: tau_r={tau_r} ratio={ratio}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_match(
    gt: &Path,
    pred: &Path,
    iou: f64,
    conf: f64,
    format: OutputFormat,
) -> Result<ExitCode> {
    check(iou > 0.0 && iou <= 1.0, "--iou must be in (0, 1]")?;
    check((0.0..=1.0).contains(&conf), "--conf must be in [0, 1]")?;
    let report = run_match(gt, pred, iou, conf)?;
    match format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&report)?),
        OutputFormat::Csv => {
            println!("images,total_ground_truth,total_predicted,total_matched");
            println!(
                "{},{},{},{}",
                report.images,
                report.total_ground_truth,
                report.total_predicted,
                report.total_matched
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_crop(
    image: &Path,
    pred: &Path,
    image_id: Option<&str>,
    conf: f64,
    out_dir: &Path,
) -> Result<ExitCode> {
    check((0.0..=1.0).contains(&conf), "--conf must be in [0, 1]")?;
    let id = image_id
        .map(str::to_owned)
        .unwrap_or_else(|| stem_of(image));
    let img = Image::load(image)?;
    let kept = load_detections_for(pred, &id, conf)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut written = 0usize;
    let mut failures = 0usize;
    for (i, det) in kept.iter().enumerate() {
        let label = det
            .label
            .map(sealrestore::annot::format_codepoint)
            .unwrap_or_else(|| "unlabeled".to_string());
        match crop(&img, &det.bbox) {
            Ok(patch) => {
                patch.save(out_dir.join(format!("{i:04}_{label}.png")))?;
                written += 1;
            }
            Err(e) => {
                eprintln!("crop {i}: {e}");
                failures += 1;
            }
        }
    }
    println!("wrote {written} crops to {}", out_dir.display());
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_overlay(
    image: &Path,
    pred: &Path,
    image_id: Option<&str>,
    conf: f64,
    embed: bool,
    out: &Path,
    style: sealrestore::OverlayStyle,
) -> Result<ExitCode> {
    check((0.0..=1.0).contains(&conf), "--conf must be in [0, 1]")?;
    check(style.font_size > 0, "--font-size must be positive")?;
    let id = image_id
        .map(str::to_owned)
        .unwrap_or_else(|| stem_of(image));
    let img = Image::load(image)?;
    let kept = load_detections_for(pred, &id, conf)?;
    let items: Vec<_> = kept
        .iter()
        .filter_map(|d| d.label.map(|c| (d.bbox, c.to_string())))
        .collect();

    let href = if embed {
        let bytes = std::fs::read(image).with_context(|| format!("reading {}", image.display()))?;
        format!(
            "data:image/png;base64,{}",
            base64::engine::general_purpose::STANDARD.encode(bytes)
        )
    } else if out.parent() == image.parent() {
        image
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| image.to_string_lossy().into_owned())
    } else {
        image.to_string_lossy().into_owned()
    };
    let svg = render_overlay(&href, img.width(), img.height(), &items, &style)?;
    std::fs::write(out, svg).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "rendered {} characters over {} into {}",
        items.len(),
        image.display(),
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_pipeline(cfg: PipelineConfig) -> Result<ExitCode> {
    validate(&cfg.params)?;
    check(
        (0.0..=1.0).contains(&cfg.confidence_threshold),
        "--conf must be in [0, 1]",
    )?;
    let manifest = run_pipeline(&cfg)?;
    let failed = manifest
        .images
        .iter()
        .filter(|r| !r.errors.is_empty())
        .count();
    println!(
        "processed {} images ({} with errors); manifest at {}",
        manifest.images.len(),
        failed,
        cfg.output_dir.join("manifest.json").display()
    );
    for record in manifest.images.iter().filter(|r| !r.errors.is_empty()) {
        for error in &record.errors {
            eprintln!("{}: {error}", record.image_id);
        }
    }
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
