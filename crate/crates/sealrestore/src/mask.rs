//! Red-seal candidate detection and binary mask morphology.
//!
//! A pixel is a seal candidate when its red channel is both bright and
//! dominant: `R >= tau_r && R >= tau_rg * G && R >= tau_rb * B`. The raw
//! mask can then be grown by square-kernel dilation to compensate for ink
//! bleeding around seal boundaries.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{Image, ImageError};

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("dilation kernel side must be odd and positive, got {0}")]
    InvalidKernel(u32),
}

/// A binary raster marking seal-candidate pixels; dimensions match the
/// source image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl SealMask {
    /// An all-false mask.
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    /// Wraps a row-major boolean buffer; panics if the length does not match.
    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Self {
        assert_eq!(
            bits.len(),
            width as usize * height as usize,
            "buffer length must be width * height"
        );
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = value;
    }

    /// Number of true bits.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Fraction of pixels marked as seal, in `[0, 1]`.
    pub fn coverage(&self) -> f64 {
        self.count() as f64 / self.bits.len() as f64
    }

    /// Writes the mask as a bilevel grayscale PNG (255 = seal).
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let data: Vec<u8> = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let buf: image::GrayImage = image::ImageBuffer::from_raw(self.width, self.height, data)
            .expect("buffer length matches dimensions");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => ImageError::Io(io),
                other => ImageError::Io(std::io::Error::other(other)),
            })
    }
}

/// Stage-2 restoration hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestoreParams {
    /// Minimum red-channel intensity, in `[0, 255]`.
    pub tau_r: f64,
    /// Required red/green dominance ratio, `>= 1`.
    pub tau_rg: f64,
    /// Required red/blue dominance ratio, `>= 1`.
    pub tau_rb: f64,
    /// Dilation structuring-element side; odd and positive.
    pub kernel: u32,
    /// Dilation iterations; 0 disables refinement.
    pub iterations: u32,
    /// Inpainting radius in pixels, `>= 1`.
    pub radius: f64,
}

impl Default for RestoreParams {
    fn default() -> Self {
        Self {
            tau_r: 90.0,
            tau_rg: 1.3,
            tau_rb: 1.3,
            kernel: 3,
            iterations: 1,
            radius: 3.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("tau_r must be in [0, 255], got {0}")]
    TauROutOfRange(f64),
    #[error("channel ratio must be >= 1, got {0}")]
    RatioBelowOne(f64),
    #[error(transparent)]
    Kernel(#[from] MaskError),
    #[error("inpainting radius must be >= 1, got {0}")]
    RadiusBelowOne(f64),
}

impl RestoreParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        if !(0.0..=255.0).contains(&self.tau_r) {
            return Err(ParamError::TauROutOfRange(self.tau_r));
        }
        for ratio in [self.tau_rg, self.tau_rb] {
            if ratio < 1.0 || ratio.is_nan() {
                return Err(ParamError::RatioBelowOne(ratio));
            }
        }
        if self.kernel == 0 || self.kernel.is_multiple_of(2) {
            return Err(MaskError::InvalidKernel(self.kernel).into());
        }
        if self.radius < 1.0 || self.radius.is_nan() {
            return Err(ParamError::RadiusBelowOne(self.radius));
        }
        Ok(())
    }
}

/// Marks every pixel satisfying the channel-ratio rule.
///
/// The ratio comparisons run in real arithmetic; all three comparisons are
/// inclusive.
pub fn detect_seal_mask(img: &Image, params: &RestoreParams) -> SealMask {
    let bits = img
        .data()
        .chunks_exact(3)
        .map(|px| {
            let (r, g, b) = (px[0] as f64, px[1] as f64, px[2] as f64);
            r >= params.tau_r && r >= params.tau_rg * g && r >= params.tau_rb * b
        })
        .collect();
    SealMask::from_bits(img.width(), img.height(), bits)
}

/// `iterations`-fold binary dilation with a `kernel` x `kernel` all-ones
/// structuring element.
///
/// Out-of-bounds neighborhoods are treated as false, so masks never grow
/// past the page edge. `iterations = 0` or `kernel = 1` returns the input
/// unchanged.
pub fn dilate(mask: &SealMask, kernel: u32, iterations: u32) -> Result<SealMask, MaskError> {
    if kernel == 0 || kernel.is_multiple_of(2) {
        return Err(MaskError::InvalidKernel(kernel));
    }
    let mut out = mask.clone();
    if kernel == 1 || iterations == 0 {
        return Ok(out);
    }
    let r = (kernel / 2) as i64;
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    for _ in 0..iterations {
        // A square element separates into a horizontal and a vertical run.
        let mut horiz = vec![false; out.bits.len()];
        for y in 0..h {
            for x in 0..w {
                let lo = (x - r).max(0);
                let hi = (x + r).min(w - 1);
                horiz[(y * w + x) as usize] = (lo..=hi).any(|xx| out.bits[(y * w + xx) as usize]);
            }
        }
        let mut vert = vec![false; out.bits.len()];
        for y in 0..h {
            for x in 0..w {
                let lo = (y - r).max(0);
                let hi = (y + r).min(h - 1);
                vert[(y * w + x) as usize] = (lo..=hi).any(|yy| horiz[(yy * w + x) as usize]);
            }
        }
        out.bits = vert;
    }
    Ok(out)
}
