//! Synthetic seal-overlaid page generation.
//!
//! Real seal scans (red ink on white) are alpha-blended onto clean pages at
//! seeded random positions, with the constraint that each seal's ink
//! bounding box overlaps at most one other seal's. The union of placed ink
//! pixels comes back as the ground-truth mask, giving paired degraded/clean
//! data for restoration scoring.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boxes::BBox;
use crate::mask::SealMask;
use crate::raster::Image;

/// Redraws allowed per seal before generation gives up.
pub const REJECTION_BUDGET: usize = 1000;

/// Template pixels whose minimum channel falls below this default count as
/// ink; seal scans are red-on-white.
pub const DEFAULT_INK_THRESHOLD: u8 = 240;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("seal placement at ({x},{y}) does not fit a {page_w}x{page_h} page")]
    OutOfBounds {
        x: u32,
        y: u32,
        page_w: u32,
        page_h: u32,
    },
    #[error("cannot place seals without templates")]
    NoTemplates,
    #[error("no admissible placement found for seal {seal} within {REJECTION_BUDGET} draws")]
    PlacementInfeasible { seal: usize },
    #[error("template {template} ({w}x{h}) does not fit the {page_w}x{page_h} page")]
    TemplateTooLarge {
        template: usize,
        w: u32,
        h: u32,
        page_w: u32,
        page_h: u32,
    },
}

/// A seal scan plus its derived ink mask.
#[derive(Debug, Clone)]
pub struct SealTemplate {
    image: Image,
    ink: SealMask,
    ink_bbox: Option<BBox>,
}

impl SealTemplate {
    /// Derives the ink mask: a pixel is ink iff `min(R, G, B) < threshold`.
    pub fn from_image(image: Image, threshold: u8) -> Self {
        let bits: Vec<bool> = image
            .data()
            .chunks_exact(3)
            .map(|px| px.iter().min().copied().unwrap_or(255) < threshold)
            .collect();
        let ink = SealMask::from_bits(image.width(), image.height(), bits);
        let ink_bbox = ink_bounding_box(&ink);
        Self {
            image,
            ink,
            ink_bbox,
        }
    }

    pub fn image(&self) -> &Image {
        &self.image
    }

    pub fn ink(&self) -> &SealMask {
        &self.ink
    }

    /// Bounding box of the ink pixels in template coordinates; `None` for a
    /// blank template.
    pub fn ink_bbox(&self) -> Option<BBox> {
        self.ink_bbox
    }
}

fn ink_bounding_box(ink: &SealMask) -> Option<BBox> {
    let (mut min_x, mut min_y) = (u32::MAX, u32::MAX);
    let (mut max_x, mut max_y) = (0u32, 0u32);
    let mut any = false;
    for y in 0..ink.height() {
        for x in 0..ink.width() {
            if ink.get(x, y) {
                any = true;
                min_x = min_x.min(x);
                min_y = min_y.min(y);
                max_x = max_x.max(x);
                max_y = max_y.max(y);
            }
        }
    }
    any.then(|| BBox {
        x: min_x as i64,
        y: min_y as i64,
        w: (max_x - min_x + 1) as i64,
        h: (max_y - min_y + 1) as i64,
    })
}

/// One applied seal: which template, where, and the ink bounding box in
/// page coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SealPlacement {
    pub template: usize,
    pub x: u32,
    pub y: u32,
    pub ink_bbox: Option<BBox>,
}

fn blend_ink(page: &mut Image, tpl: &SealTemplate, x0: u32, y0: u32, opacity: f64) {
    for ty in 0..tpl.image.height() {
        for tx in 0..tpl.image.width() {
            if !tpl.ink.get(tx, ty) {
                continue;
            }
            let (px, py) = (x0 + tx, y0 + ty);
            let under = page.pixel(px, py);
            let over = tpl.image.pixel(tx, ty);
            let mut blended = [0u8; 3];
            for c in 0..3 {
                let v = (1.0 - opacity) * under[c] as f64 + opacity * over[c] as f64;
                blended[c] = v.round().clamp(0.0, 255.0) as u8;
            }
            page.set_pixel(px, py, blended);
        }
    }
}

/// Alpha-blends the template's ink pixels onto the page at `pos`;
/// everything outside the ink mask is untouched.
pub fn composite_seal(
    page: &Image,
    tpl: &SealTemplate,
    pos: (u32, u32),
    opacity: f64,
) -> Result<Image, SynthError> {
    assert!(opacity > 0.0 && opacity <= 1.0, "opacity must be in (0, 1]");
    let (x, y) = pos;
    if x + tpl.image.width() > page.width() || y + tpl.image.height() > page.height() {
        return Err(SynthError::OutOfBounds {
            x,
            y,
            page_w: page.width(),
            page_h: page.height(),
        });
    }
    let mut out = page.clone();
    blend_ink(&mut out, tpl, x, y, opacity);
    Ok(out)
}

/// Places `n` seals at seeded-uniform positions and returns the overlaid
/// page, the placements, and the union ink mask as ground truth.
///
/// A candidate is rejected when its ink bounding box would give any seal
/// more than one overlap partner; after [`REJECTION_BUDGET`] consecutive
/// rejections for one seal, generation fails rather than placing fewer
/// seals. Fixed `(page, templates, n, seed, opacity)` reproduce the output
/// bit-exactly.
pub fn generate_synthetic(
    page: &Image,
    templates: &[SealTemplate],
    n: usize,
    seed: u64,
    opacity: f64,
) -> Result<(Image, Vec<SealPlacement>, SealMask), SynthError> {
    assert!(opacity > 0.0 && opacity <= 1.0, "opacity must be in (0, 1]");
    let mut out = page.clone();
    let mut ground_truth = SealMask::empty(page.width(), page.height());
    let mut placements: Vec<SealPlacement> = Vec::with_capacity(n);
    if n == 0 {
        return Ok((out, placements, ground_truth));
    }
    if templates.is_empty() {
        return Err(SynthError::NoTemplates);
    }
    for (i, tpl) in templates.iter().enumerate() {
        if tpl.image.width() > page.width() || tpl.image.height() > page.height() {
            return Err(SynthError::TemplateTooLarge {
                template: i,
                w: tpl.image.width(),
                h: tpl.image.height(),
                page_w: page.width(),
                page_h: page.height(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut partners = vec![0usize; 0];
    for seal in 0..n {
        let mut accepted = None;
        for _attempt in 0..REJECTION_BUDGET {
            let tid = rng.random_range(0..templates.len());
            let tpl = &templates[tid];
            let x = rng.random_range(0..=page.width() - tpl.image.width());
            let y = rng.random_range(0..=page.height() - tpl.image.height());
            let cand_bbox = tpl.ink_bbox.map(|b| BBox {
                x: b.x + x as i64,
                y: b.y + y as i64,
                ..b
            });
            let overlaps: Vec<usize> = match cand_bbox {
                Some(cb) => placements
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.ink_bbox.is_some_and(|pb| pb.intersects(&cb)))
                    .map(|(j, _)| j)
                    .collect(),
                None => Vec::new(),
            };
            // Admissible iff every seal keeps at most one overlap partner.
            if overlaps.len() > 1 || overlaps.iter().any(|&j| partners[j] > 0) {
                continue;
            }
            accepted = Some((tid, x, y, cand_bbox, overlaps));
            break;
        }
        let Some((tid, x, y, cand_bbox, overlaps)) = accepted else {
            return Err(SynthError::PlacementInfeasible { seal });
        };
        let tpl = &templates[tid];
        blend_ink(&mut out, tpl, x, y, opacity);
        for ty in 0..tpl.image.height() {
            for tx in 0..tpl.image.width() {
                if tpl.ink.get(tx, ty) {
                    ground_truth.set(x + tx, y + ty, true);
                }
            }
        }
        for &j in &overlaps {
            partners[j] += 1;
        }
        partners.push(overlaps.len());
        placements.push(SealPlacement {
            template: tid,
            x,
            y,
            ink_bbox: cand_bbox,
        });
    }
    Ok((out, placements, ground_truth))
}
