//! Pixel buffers and image file I/O.
//!
//! [`Image`] is an interleaved 8-bit RGB raster; [`GrayImage`] keeps
//! real-valued luma samples so metric computations do not lose precision to
//! requantization. PNG and JPEG decode are supported; encoding is PNG only,
//! so a saved image always round-trips bit-exactly.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// BT.601 luma weights.
const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error("image has zero width or height")]
    ZeroDimension,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// An RGB image with interleaved 8-bit samples in row-major order.
///
/// Coordinates are (x right, y down) with the origin at the top-left pixel.
/// Images are immutable-by-convention after construction and safe to share
/// across threads for reading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl Image {
    /// Wraps an interleaved RGB buffer.
    ///
    /// Panics if either dimension is zero or the buffer length is not
    /// `width * height * 3`.
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be nonzero");
        assert_eq!(
            data.len(),
            width as usize * height as usize * 3,
            "buffer length must be width * height * 3"
        );
        Self {
            width,
            height,
            data,
        }
    }

    /// A `width` x `height` image with every pixel set to `rgb`.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 3);
        for _ in 0..n {
            data.extend_from_slice(&rgb);
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Interleaved RGB samples, row-major.
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub(crate) fn index(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.index(x, y);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = self.index(x, y);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Decodes PNG or JPEG bytes.
    ///
    /// Grayscale sources are replicated across the three channels; an alpha
    /// channel is composited over white, since document scans are
    /// paper-background images.
    pub fn decode(bytes: &[u8]) -> Result<Self, ImageError> {
        let reader = image::ImageReader::new(Cursor::new(bytes))
            .with_guessed_format()
            .map_err(|e| ImageError::Decode(e.to_string()))?;
        let decoded = reader
            .decode()
            .map_err(|e| ImageError::Decode(e.to_string()))?;
        if decoded.width() == 0 || decoded.height() == 0 {
            return Err(ImageError::ZeroDimension);
        }
        let (width, height) = (decoded.width(), decoded.height());
        let data = if decoded.color().has_alpha() {
            let rgba = decoded.into_rgba8();
            let mut data = Vec::with_capacity(width as usize * height as usize * 3);
            for px in rgba.pixels() {
                let [r, g, b, a] = px.0;
                let a = a as u32;
                for c in [r, g, b] {
                    // Straight-alpha composite over white, rounded.
                    let v = (c as u32 * a + 255 * (255 - a) + 127) / 255;
                    data.push(v as u8);
                }
            }
            data
        } else {
            decoded.into_rgb8().into_raw()
        };
        Ok(Self::new(width, height, data))
    }

    /// Loads a PNG or JPEG file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                ImageError::FileNotFound(path.to_path_buf())
            } else {
                ImageError::Io(e)
            }
        })?;
        Self::decode(&bytes)
    }

    /// Writes the image as PNG (lossless; `load` reproduces it bit-exactly).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let buf: image::RgbImage =
            image::ImageBuffer::from_raw(self.width, self.height, self.data.clone())
                .expect("buffer length matches dimensions");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => ImageError::Io(io),
                other => ImageError::Io(std::io::Error::other(other)),
            })
    }

    /// Converts to real-valued BT.601 luma without requantizing.
    pub fn to_gray(&self) -> GrayImage {
        let data = self
            .data
            .chunks_exact(3)
            .map(|px| {
                LUMA_WEIGHTS[0] * px[0] as f64
                    + LUMA_WEIGHTS[1] * px[1] as f64
                    + LUMA_WEIGHTS[2] * px[2] as f64
            })
            .collect();
        GrayImage {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// A single-channel raster with real-valued samples in `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl GrayImage {
    /// Wraps a row-major single-channel buffer.
    ///
    /// Panics if the buffer length is not `width * height`.
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be nonzero");
        assert_eq!(
            data.len(),
            width as usize * height as usize,
            "buffer length must be width * height"
        );
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn sample(&self, x: u32, y: u32) -> f64 {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_validates_buffer_length() {
        let img = Image::new(2, 3, vec![0; 18]);
        assert_eq!(img.width(), 2);
        assert_eq!(img.height(), 3);
    }

    #[test]
    #[should_panic]
    fn new_rejects_short_buffer() {
        let _ = Image::new(2, 3, vec![0; 17]);
    }

    #[test]
    fn png_round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rt.png");
        let mut img = Image::filled(5, 4, [10, 20, 30]);
        img.set_pixel(3, 2, [255, 0, 128]);
        img.save(&path).unwrap();
        let back = Image::load(&path).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn one_by_one_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("px.png");
        let img = Image::filled(1, 1, [7, 8, 9]);
        img.save(&path).unwrap();
        assert_eq!(Image::load(&path).unwrap(), img);
    }

    #[test]
    fn red_png_decodes_to_expected_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("red.png");
        Image::filled(2, 2, [255, 0, 0]).save(&path).unwrap();
        let img = Image::load(&path).unwrap();
        assert_eq!(img.data(), &[255, 0, 0].repeat(4)[..]);
    }

    #[test]
    fn grayscale_source_replicates_channels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gray.png");
        let luma = image::GrayImage::from_pixel(1, 1, image::Luma([128]));
        luma.save(&path).unwrap();
        let img = Image::load(&path).unwrap();
        assert_eq!(img.pixel(0, 0), [128, 128, 128]);
    }

    #[test]
    fn alpha_composites_over_white() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgba.png");
        let rgba = image::RgbaImage::from_pixel(1, 1, image::Rgba([0, 0, 0, 0]));
        rgba.save(&path).unwrap();
        let img = Image::load(&path).unwrap();
        // Fully transparent black shows the white paper background.
        assert_eq!(img.pixel(0, 0), [255, 255, 255]);
    }

    #[test]
    fn truncated_file_is_a_decode_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.png");
        let full = dir.path().join("full.png");
        Image::filled(8, 8, [1, 2, 3]).save(&full).unwrap();
        let bytes = std::fs::read(&full).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(Image::load(&path), Err(ImageError::Decode(_))));
    }

    #[test]
    fn missing_file_is_file_not_found() {
        assert!(matches!(
            Image::load("/nonexistent/nowhere.png"),
            Err(ImageError::FileNotFound(_))
        ));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let img = Image::filled(1, 1, [0, 0, 0]);
        assert!(matches!(
            img.save("/nonexistent-dir/out.png"),
            Err(ImageError::Io(_))
        ));
    }

    #[test]
    fn luma_golden_values() {
        let img = Image::new(3, 1, vec![255, 255, 255, 255, 0, 0, 0, 0, 0]);
        let gray = img.to_gray();
        assert!((gray.sample(0, 0) - 255.0).abs() < 1e-12);
        // 0.299 * 255 computed by hand.
        assert!((gray.sample(1, 0) - 76.245).abs() < 1e-12);
        assert_eq!(gray.sample(2, 0), 0.0);
    }

    #[test]
    fn luma_is_monotone_in_each_channel() {
        let base = Image::filled(1, 1, [100, 100, 100]);
        let y0 = base.to_gray().sample(0, 0);
        for c in 0..3 {
            let mut px = [100u8; 3];
            px[c] = 101;
            let y1 = Image::filled(1, 1, px).to_gray().sample(0, 0);
            assert!(y1 > y0);
        }
    }
}
