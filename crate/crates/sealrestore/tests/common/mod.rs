//! Deterministic fixtures shared by the integration suites: procedural
//! text-bearing pages, seal templates, and random rasters.
//!
//! Not every suite uses every helper.
#![allow(dead_code)]
//!
//! Page colors are chosen so the channel-ratio rule behaves like it does on
//! real scans: paper grain and strokes are never red-dominant, warm stains
//! trip a 1.2 ratio but not 1.3, and blended seal ink always satisfies
//! `R >= 150 && R >= 1.5 * max(G, B)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sealrestore::{Image, SealMask, SealTemplate};

fn shade(base: [i16; 3], noise: i16, rng: &mut ChaCha8Rng) -> [u8; 3] {
    let n: i16 = rng.random_range(-noise..=noise);
    base.map(|c| (c + n).clamp(0, 255) as u8)
}

/// A clean page: noisy paper, vertical stroke columns, and a few warm
/// stains (red-dominant at ratio 1.2 only).
pub fn text_page(width: u32, height: u32, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7061_6765);
    let mut img = Image::filled(width, height, [0, 0, 0]);
    for y in 0..height {
        for x in 0..width {
            img.set_pixel(x, y, shade([221, 211, 191], 8, &mut rng));
        }
    }
    let stains = rng.random_range(3..=5);
    for _ in 0..stains {
        let cx = rng.random_range(0..width) as i64;
        let cy = rng.random_range(0..height) as i64;
        let rx = rng.random_range(6..=11) as i64;
        let ry = rng.random_range(5..=9) as i64;
        for y in (cy - ry).max(0)..=(cy + ry).min(height as i64 - 1) {
            for x in (cx - rx).max(0)..=(cx + rx).min(width as i64 - 1) {
                let dx = (x - cx) as f64 / rx as f64;
                let dy = (y - cy) as f64 / ry as f64;
                if dx * dx + dy * dy <= 1.0 {
                    img.set_pixel(x as u32, y as u32, shade([172, 136, 121], 4, &mut rng));
                }
            }
        }
    }
    let mut col = 14i64;
    while col + 8 < width as i64 {
        let mut y = rng.random_range(4..14) as i64;
        while y + 18 < height as i64 {
            let glyph_h = rng.random_range(9..=16) as i64;
            let glyph_w = rng.random_range(2..=4) as i64;
            let x0 = col + rng.random_range(0..3) as i64;
            for yy in y..y + glyph_h {
                for xx in x0..(x0 + glyph_w).min(width as i64) {
                    img.set_pixel(xx as u32, yy as u32, shade([48, 45, 42], 3, &mut rng));
                }
            }
            if rng.random_range(0..3) == 0 {
                let ty = y + glyph_h / 2;
                for xx in (col - 3).max(0)..(col + 7).min(width as i64) {
                    img.set_pixel(xx as u32, ty as u32, shade([48, 45, 42], 3, &mut rng));
                }
            }
            y += glyph_h + rng.random_range(4..=9) as i64;
        }
        col += 26;
    }
    img
}

/// A square seal scan: red ring plus inner cross bars on a white ground.
pub fn seal_template(size: u32, seed: u64) -> SealTemplate {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7365_616c);
    let mut img = Image::filled(size, size, [255, 255, 255]);
    let c = (size as f64 - 1.0) / 2.0;
    let outer = c - 0.5;
    let inner = outer - (size as f64 / 6.0).max(3.0);
    for y in 0..size {
        for x in 0..size {
            let dx = x as f64 - c;
            let dy = y as f64 - c;
            let d = (dx * dx + dy * dy).sqrt();
            let in_ring = d <= outer && d >= inner;
            let in_bar = d < inner
                && ((dx.abs() <= 2.0 && dy.abs() <= inner - 2.0)
                    || (dy.abs() <= 2.0 && dx.abs() <= inner - 2.0));
            if in_ring || in_bar {
                img.set_pixel(x, y, shade([185, 27, 25], 6, &mut rng));
            }
        }
    }
    SealTemplate::from_image(img, 240)
}

pub fn random_image(width: u32, height: u32, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width as usize * height as usize * 3)
        .map(|_| rng.random())
        .collect();
    Image::new(width, height, data)
}

pub fn random_mask(width: u32, height: u32, density: f64, seed: u64) -> SealMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits = (0..width as usize * height as usize)
        .map(|_| rng.random_bool(density))
        .collect();
    SealMask::from_bits(width, height, bits)
}
