//! Image-fidelity scoring: MSE, PSNR, and windowed SSIM.
//!
//! PSNR runs over all RGB samples jointly (one MSE across the three
//! channels). SSIM runs on BT.601 luma with the canonical reference
//! configuration: an 11x11 Gaussian window (sigma 1.5, normalized to sum 1)
//! aggregated over windows fully inside the image, with no padding.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{GrayImage, Image};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("images are {aw}x{ah} and {bw}x{bh}; dimensions must match")]
    DimensionMismatch { aw: u32, ah: u32, bw: u32, bh: u32 },
    #[error("image is {w}x{h}; SSIM needs at least {SSIM_WINDOW} pixels per side")]
    TooSmall { w: u32, h: u32 },
}

fn check_dims(aw: u32, ah: u32, bw: u32, bh: u32) -> Result<(), MetricsError> {
    if (aw, ah) != (bw, bh) {
        return Err(MetricsError::DimensionMismatch { aw, ah, bw, bh });
    }
    Ok(())
}

/// Mean squared difference over all `H x W x 3` samples.
pub fn mse(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    check_dims(a.width(), a.height(), b.width(), b.height())?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// Peak signal-to-noise ratio in dB; identical images give `f64::INFINITY`.
pub fn psnr(a: &Image, b: &Image) -> Result<f64, MetricsError> {
    let mse = mse(a, b)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut kernel = [0.0; SSIM_WINDOW];
    let center = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, k) in kernel.iter_mut().enumerate() {
        let d = i as f64 - center;
        *k = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *k;
    }
    for k in &mut kernel {
        *k /= sum;
    }
    kernel
}

/// Separable valid-region filtering: horizontal then vertical pass, output
/// shrinks by `SSIM_WINDOW - 1` per axis.
fn filter_valid(src: &[f64], w: usize, h: usize, kernel: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - (SSIM_WINDOW - 1);
    let oh = h - (SSIM_WINDOW - 1);
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        for xo in 0..ow {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * src[y * w + xo + k];
            }
            horiz[y * ow + xo] = acc;
        }
    }
    let mut out = vec![0.0; ow * oh];
    for yo in 0..oh {
        for xo in 0..ow {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * horiz[(yo + k) * ow + xo];
            }
            out[yo * ow + xo] = acc;
        }
    }
    out
}

/// Mean structural similarity between two luma images.
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricsError> {
    check_dims(a.width(), a.height(), b.width(), b.height())?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::TooSmall {
            w: a.width(),
            h: a.height(),
        });
    }
    let kernel = gaussian_kernel();
    let pa = a.data();
    let pb = b.data();
    let sq_a: Vec<f64> = pa.iter().map(|&v| v * v).collect();
    let sq_b: Vec<f64> = pb.iter().map(|&v| v * v).collect();
    let ab: Vec<f64> = pa.iter().zip(pb).map(|(&x, &y)| x * y).collect();

    let mu_a = filter_valid(pa, w, h, &kernel);
    let mu_b = filter_valid(pb, w, h, &kernel);
    let m_aa = filter_valid(&sq_a, w, h, &kernel);
    let m_bb = filter_valid(&sq_b, w, h, &kernel);
    let m_ab = filter_valid(&ab, w, h, &kernel);

    let mut sum = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = m_aa[i] - ma * ma;
        let var_b = m_bb[i] - mb * mb;
        let cov = m_ab[i] - ma * mb;
        sum += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2));
    }
    Ok(sum / mu_a.len() as f64)
}

/// PSNR and SSIM for one restored/reference pair already in memory.
pub fn evaluate_pair(restored: &Image, reference: &Image) -> Result<(f64, f64), MetricsError> {
    let p = psnr(restored, reference)?;
    let s = ssim(&restored.to_gray(), &reference.to_gray())?;
    Ok((p, s))
}

/// One scored pair. `psnr_db` is `None` for the infinite (zero-MSE) case,
/// which JSON cannot represent directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairMetrics {
    pub image_id: String,
    pub psnr_db: Option<f64>,
    pub ssim: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairFailure {
    pub image_id: String,
    pub error: String,
}

/// Per-image scores plus aggregate means. Means are absent when no pair
/// scored; the PSNR mean covers finite values only, with infinite
/// occurrences counted separately.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_image: Vec<PairMetrics>,
    pub failures: Vec<PairFailure>,
    pub mean_psnr_db: Option<f64>,
    pub infinite_psnr_count: usize,
    pub mean_ssim: Option<f64>,
}

impl MetricsReport {
    /// Assembles the aggregate fields from scored rows.
    pub fn from_rows(per_image: Vec<PairMetrics>, failures: Vec<PairFailure>) -> Self {
        let finite: Vec<f64> = per_image.iter().filter_map(|m| m.psnr_db).collect();
        let infinite_psnr_count = per_image.iter().filter(|m| m.psnr_db.is_none()).count();
        let mean_psnr_db = if finite.is_empty() {
            None
        } else {
            Some(finite.iter().sum::<f64>() / finite.len() as f64)
        };
        let mean_ssim = if per_image.is_empty() {
            None
        } else {
            Some(per_image.iter().map(|m| m.ssim).sum::<f64>() / per_image.len() as f64)
        };
        Self {
            per_image,
            failures,
            mean_psnr_db,
            infinite_psnr_count,
            mean_ssim,
        }
    }

    /// CSV with columns `image_id,psnr_db,ssim`; infinite PSNR prints `inf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image_id,psnr_db,ssim\n");
        for row in &self.per_image {
            let psnr = match row.psnr_db {
                Some(v) => format!("{v:.6}"),
                None => "inf".to_string(),
            };
            out.push_str(&format!("{},{},{:.6}\n", row.image_id, psnr, row.ssim));
        }
        out
    }
}

fn stem_of(path: &std::path::Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.to_string_lossy().into_owned())
}

/// Scores every (restored, reference) pair. Pairs that fail to load or
/// mismatch are reported individually without aborting the set; row order
/// follows input order.
pub fn evaluate_set(pairs: &[(PathBuf, PathBuf)]) -> MetricsReport {
    let results: Vec<Result<PairMetrics, PairFailure>> = pairs
        .par_iter()
        .map(|(restored_path, reference_path)| {
            let image_id = stem_of(restored_path);
            let score = || -> Result<PairMetrics, String> {
                let restored = Image::load(restored_path).map_err(|e| e.to_string())?;
                let reference = Image::load(reference_path).map_err(|e| e.to_string())?;
                let (p, s) = evaluate_pair(&restored, &reference).map_err(|e| e.to_string())?;
                Ok(PairMetrics {
                    image_id: image_id.clone(),
                    psnr_db: p.is_finite().then_some(p),
                    ssim: s,
                })
            };
            score().map_err(|error| PairFailure {
                image_id: stem_of(restored_path),
                error,
            })
        })
        .collect();

    let mut per_image = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(m) => per_image.push(m),
            Err(f) => failures.push(f),
        }
    }
    MetricsReport::from_rows(per_image, failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn offset_image(w: u32, h: u32, base: u8, offset: u8) -> (Image, Image) {
        let a = Image::filled(w, h, [base; 3]);
        let b = Image::filled(w, h, [base + offset; 3]);
        (a, b)
    }

    #[test]
    fn mse_examples() {
        let (a, b) = offset_image(4, 4, 10, 0);
        assert_eq!(mse(&a, &b).unwrap(), 0.0);
        let (a, b) = offset_image(4, 4, 10, 16);
        assert_eq!(mse(&a, &b).unwrap(), 256.0);
        let a = Image::new(1, 1, vec![0, 0, 0]);
        let b = Image::new(1, 1, vec![3, 0, 0]);
        assert_eq!(mse(&a, &b).unwrap(), 3.0);
    }

    #[test]
    fn psnr_golden_values() {
        let (a, b) = offset_image(8, 8, 100, 16);
        let v = psnr(&a, &b).unwrap();
        // 10 * log10(65025 / 256) computed by hand.
        assert!((v - 24.049).abs() < 0.01, "got {v}");
        let black = Image::filled(8, 8, [0; 3]);
        let white = Image::filled(8, 8, [255; 3]);
        assert!(psnr(&black, &white).unwrap().abs() < 0.001);
        let (a, b) = offset_image(8, 8, 50, 0);
        assert!(psnr(&a, &b).unwrap().is_infinite());
    }

    #[test]
    fn psnr_mismatched_dims_error() {
        let a = Image::filled(4, 4, [0; 3]);
        let b = Image::filled(4, 5, [0; 3]);
        assert!(matches!(
            psnr(&a, &b),
            Err(MetricsError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ssim_identical_is_one() {
        let img = Image::new(
            16,
            16,
            (0..16 * 16 * 3).map(|v| (v * 31 % 256) as u8).collect(),
        );
        let g = img.to_gray();
        assert!((ssim(&g, &g).unwrap() - 1.0).abs() < 1e-9);
        let flat = Image::filled(12, 12, [100; 3]).to_gray();
        assert!((ssim(&flat, &flat).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ssim_black_vs_white_closed_form() {
        let a = Image::filled(12, 12, [0; 3]).to_gray();
        let b = Image::filled(12, 12, [255; 3]).to_gray();
        // Zero variances collapse the formula to C1 / (255^2 + C1).
        let expected = 6.5025 / 65031.5025;
        assert!((ssim(&a, &b).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = Image::filled(10, 12, [0; 3]).to_gray();
        let b = Image::filled(10, 12, [0; 3]).to_gray();
        assert!(matches!(
            ssim(&a, &b),
            Err(MetricsError::TooSmall { w: 10, h: 12 })
        ));
    }

    #[test]
    fn psnr_decreases_with_noise_amplitude() {
        let base = Image::new(
            16,
            16,
            (0..16 * 16 * 3).map(|v| (v * 7 % 200) as u8).collect(),
        );
        let mut last = f64::INFINITY;
        for amp in [2u8, 8, 24, 60] {
            let noisy = Image::new(
                16,
                16,
                base.data()
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        if i % 2 == 0 {
                            v.saturating_add(amp)
                        } else {
                            v.saturating_sub(amp)
                        }
                    })
                    .collect(),
            );
            let v = psnr(&base, &noisy).unwrap();
            assert!(v < last, "psnr must drop as noise grows");
            last = v;
        }
    }

    /// Direct per-window summation, the oracle for the separable filter.
    fn ssim_direct(a: &GrayImage, b: &GrayImage) -> f64 {
        let kernel = gaussian_kernel();
        let (w, h) = (a.width() as usize, a.height() as usize);
        let mut sum = 0.0;
        let mut count = 0usize;
        for wy in 0..=(h - SSIM_WINDOW) {
            for wx in 0..=(w - SSIM_WINDOW) {
                let mut mu_a = 0.0;
                let mut mu_b = 0.0;
                let mut m_aa = 0.0;
                let mut m_bb = 0.0;
                let mut m_ab = 0.0;
                for ky in 0..SSIM_WINDOW {
                    for kx in 0..SSIM_WINDOW {
                        let weight = kernel[ky] * kernel[kx];
                        let va = a.data()[(wy + ky) * w + wx + kx];
                        let vb = b.data()[(wy + ky) * w + wx + kx];
                        mu_a += weight * va;
                        mu_b += weight * vb;
                        m_aa += weight * va * va;
                        m_bb += weight * vb * vb;
                        m_ab += weight * va * vb;
                    }
                }
                let var_a = m_aa - mu_a * mu_a;
                let var_b = m_bb - mu_b * mu_b;
                let cov = m_ab - mu_a * mu_b;
                sum += ((2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2))
                    / ((mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2));
                count += 1;
            }
        }
        sum / count as f64
    }

    #[test]
    fn ssim_matches_direct_summation_oracle() {
        let mut seed = 0x2545F4914F6CDD1Du64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 32) as u8
        };
        for _ in 0..4 {
            let a = GrayImage::new(16, 16, (0..256).map(|_| next() as f64).collect());
            let b = GrayImage::new(16, 16, (0..256).map(|_| next() as f64).collect());
            let fast = ssim(&a, &b).unwrap();
            let slow = ssim_direct(&a, &b);
            assert!((fast - slow).abs() < 1e-9, "fast {fast} vs direct {slow}");
        }
    }

    #[test]
    fn report_means_and_csv() {
        let rows = vec![
            PairMetrics {
                image_id: "a".into(),
                psnr_db: Some(20.0),
                ssim: 0.9,
            },
            PairMetrics {
                image_id: "b".into(),
                psnr_db: Some(30.0),
                ssim: 0.8,
            },
            PairMetrics {
                image_id: "c".into(),
                psnr_db: None,
                ssim: 1.0,
            },
        ];
        let report = MetricsReport::from_rows(rows, vec![]);
        assert_eq!(report.mean_psnr_db, Some(25.0));
        assert_eq!(report.infinite_psnr_count, 1);
        assert!((report.mean_ssim.unwrap() - 0.9).abs() < 1e-12);
        let csv = report.to_csv();
        assert!(csv.starts_with("image_id,psnr_db,ssim\n"));
        assert!(csv.contains("c,inf,1.000000"));
    }

    #[test]
    fn evaluate_set_reports_failures_per_item() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.png");
        Image::filled(16, 16, [5; 3]).save(&good).unwrap();
        let pairs = vec![
            (good.clone(), good.clone()),
            (dir.path().join("missing.png"), good.clone()),
        ];
        let report = evaluate_set(&pairs);
        assert_eq!(report.per_image.len(), 1);
        assert_eq!(report.failures.len(), 1);
        assert_eq!(report.infinite_psnr_count, 1);
        assert_eq!(report.mean_ssim, Some(1.0));
        assert_eq!(report.mean_psnr_db, None);
    }

    proptest! {
        #[test]
        fn psnr_and_ssim_are_symmetric(
            seed_a in proptest::collection::vec(0u8..=255, 16 * 16 * 3),
            seed_b in proptest::collection::vec(0u8..=255, 16 * 16 * 3),
        ) {
            let a = Image::new(16, 16, seed_a);
            let b = Image::new(16, 16, seed_b);
            let pab = psnr(&a, &b).unwrap();
            let pba = psnr(&b, &a).unwrap();
            if pab.is_finite() {
                prop_assert!((pab - pba).abs() < 1e-9);
            } else {
                prop_assert!(pba.is_infinite());
            }
            let (ga, gb) = (a.to_gray(), b.to_gray());
            let sab = ssim(&ga, &gb).unwrap();
            let sba = ssim(&gb, &ga).unwrap();
            prop_assert!((sab - sba).abs() < 1e-9);
            prop_assert!((-1.0..=1.0 + 1e-12).contains(&sab));
        }
    }
}
