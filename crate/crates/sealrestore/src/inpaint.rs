//! Fast-marching inpainting of masked regions.
//!
//! Masked pixels are filled front-to-back, ordered by an eikonal distance
//! field solved on the pixel grid. Each pixel is reconstructed as a weighted
//! average of the already-valued pixels inside its inpainting radius, where
//! the weights favor contributors that lie behind the marching front
//! (`dir`), close by (`dst`), and near the same distance level (`lev`).
//! First-order image gradients extrapolate each contribution toward the
//! target pixel.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::mask::{detect_seal_mask, dilate, MaskError, RestoreParams, SealMask};
use crate::raster::Image;

/// Sentinel for not-yet-computed distances.
const T_LARGE: f64 = 1e6;
/// Floor for the directional weight component.
const DIR_EPSILON: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum InpaintError {
    #[error("image is {img_w}x{img_h} but mask is {mask_w}x{mask_h}")]
    DimensionMismatch {
        img_w: u32,
        img_h: u32,
        mask_w: u32,
        mask_h: u32,
    },
    #[error("image has no pixels")]
    EmptyImage,
}

#[derive(Debug, Error)]
pub enum RestoreError {
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Inpaint(#[from] InpaintError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flag {
    /// Pixel value and distance are final.
    Known,
    /// On the current front; queued for processing.
    Band,
    /// Still to be reached by the front.
    Inside,
}

/// Heap entry; ties on `t` break by ascending row-major index so runs are
/// bit-reproducible.
#[derive(Debug, Clone, Copy, PartialEq)]
struct FrontPixel {
    t: f64,
    idx: usize,
}

impl Eq for FrontPixel {}

impl Ord for FrontPixel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.t
            .total_cmp(&other.t)
            .then_with(|| self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for FrontPixel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Narrow-band marching state shared by the distance and inpainting passes.
struct Marcher {
    width: usize,
    height: usize,
    flags: Vec<Flag>,
    t: Vec<f64>,
    heap: BinaryHeap<std::cmp::Reverse<FrontPixel>>,
}

impl Marcher {
    /// State for marching into `target`: `target` pixels are `Inside`, the
    /// one-pixel ring of non-target pixels 4-adjacent to it forms the seed
    /// band at distance zero, and everything else is `Known` carrying
    /// `initial_t`.
    fn new(target: &SealMask, initial_t: Vec<f64>) -> Self {
        let width = target.width() as usize;
        let height = target.height() as usize;
        let n = width * height;
        debug_assert_eq!(initial_t.len(), n);
        let mut flags = vec![Flag::Known; n];
        let mut t = initial_t;
        for (i, &inside) in target.bits().iter().enumerate() {
            if inside {
                flags[i] = Flag::Inside;
                t[i] = T_LARGE;
            }
        }
        let mut heap = BinaryHeap::new();
        for y in 0..height {
            for x in 0..width {
                let i = y * width + x;
                if flags[i] != Flag::Known {
                    continue;
                }
                let adjacent_inside = (x > 0 && flags[i - 1] == Flag::Inside)
                    || (x + 1 < width && flags[i + 1] == Flag::Inside)
                    || (y > 0 && flags[i - width] == Flag::Inside)
                    || (y + 1 < height && flags[i + width] == Flag::Inside);
                if adjacent_inside {
                    flags[i] = Flag::Band;
                    t[i] = 0.0;
                    heap.push(std::cmp::Reverse(FrontPixel { t: 0.0, idx: i }));
                }
            }
        }
        Self {
            width,
            height,
            flags,
            t,
            heap,
        }
    }

    /// Pops the band pixel with the smallest distance and freezes it. Each
    /// pixel enters the heap exactly once (distances are assigned at
    /// discovery and never revised), so pop keys are non-decreasing.
    fn pop_front(&mut self) -> Option<usize> {
        while let Some(std::cmp::Reverse(fp)) = self.heap.pop() {
            if self.flags[fp.idx] == Flag::Band {
                self.flags[fp.idx] = Flag::Known;
                return Some(fp.idx);
            }
        }
        None
    }

    fn neighbors4(&self, idx: usize) -> [Option<usize>; 4] {
        let (x, y) = (idx % self.width, idx / self.width);
        [
            (y > 0).then(|| idx - self.width),
            (x > 0).then(|| idx - 1),
            (x + 1 < self.width).then(|| idx + 1),
            (y + 1 < self.height).then(|| idx + self.width),
        ]
    }

    #[inline]
    fn usable(&self, idx: usize) -> bool {
        self.flags[idx] != Flag::Inside
    }

    /// First-order upwind solve from one vertical and one horizontal
    /// neighbor candidate; `None` marks an out-of-bounds side.
    fn solve_pair(&self, a: Option<usize>, b: Option<usize>) -> f64 {
        let ta = a.filter(|&i| self.usable(i)).map(|i| self.t[i]);
        let tb = b.filter(|&i| self.usable(i)).map(|i| self.t[i]);
        match (ta, tb) {
            (Some(ta), Some(tb)) => {
                if (ta - tb).abs() >= 1.0 {
                    1.0 + ta.min(tb)
                } else {
                    let d = ta - tb;
                    (ta + tb + (2.0 - d * d).sqrt()) * 0.5
                }
            }
            (Some(ta), None) => 1.0 + ta,
            (None, Some(tb)) => 1.0 + tb,
            (None, None) => T_LARGE,
        }
    }

    /// Distance update min-solved over the four vertical/horizontal
    /// neighbor pairs.
    fn solve4(&self, idx: usize) -> f64 {
        let [up, left, right, down] = self.neighbors4(idx);
        self.solve_pair(up, left)
            .min(self.solve_pair(up, right))
            .min(self.solve_pair(down, left))
            .min(self.solve_pair(down, right))
    }

    /// Normalized gradient of the distance field at `idx`, estimated from
    /// usable neighbors (central where both sides are usable, one-sided
    /// where only one is, zero otherwise).
    fn front_normal(&self, idx: usize) -> (f64, f64) {
        let (x, y) = (idx % self.width, idx / self.width);
        let axis = |lo: Option<usize>, hi: Option<usize>| -> f64 {
            let lo = lo.filter(|&i| self.usable(i));
            let hi = hi.filter(|&i| self.usable(i));
            match (lo, hi) {
                (Some(l), Some(h)) => (self.t[h] - self.t[l]) * 0.5,
                (Some(l), None) => self.t[idx] - self.t[l],
                (None, Some(h)) => self.t[h] - self.t[idx],
                (None, None) => 0.0,
            }
        };
        let gx = axis(
            (x > 0).then(|| idx - 1),
            (x + 1 < self.width).then(|| idx + 1),
        );
        let gy = axis(
            (y > 0).then(|| idx - self.width),
            (y + 1 < self.height).then(|| idx + self.width),
        );
        let len = (gx * gx + gy * gy).sqrt();
        if len > 0.0 {
            (gx / len, gy / len)
        } else {
            (0.0, 0.0)
        }
    }
}

/// Solves the eikonal distance-to-boundary problem over the mask.
///
/// Returns a row-major field: zero outside the mask and on its boundary
/// ring, and the upwind-approximated Euclidean distance to that ring inside.
/// Mask pixels unreachable from any boundary (a mask covering the whole
/// image) keep a large sentinel value.
pub fn solve_eikonal(mask: &SealMask) -> Vec<f64> {
    let n = mask.width() as usize * mask.height() as usize;
    let mut state = Marcher::new(mask, vec![0.0; n]);
    while let Some(p) = state.pop_front() {
        relax_around(&mut state, p);
    }
    state.t
}

/// Discovers the still-inside neighbors of a frozen pixel, assigning each
/// its upwind distance and queueing it on the band.
fn relax_around(state: &mut Marcher, p: usize) {
    for nb in state.neighbors4(p).into_iter().flatten() {
        if state.flags[nb] == Flag::Inside {
            let d = state.solve4(nb);
            state.t[nb] = d;
            state.flags[nb] = Flag::Band;
            state
                .heap
                .push(std::cmp::Reverse(FrontPixel { t: d, idx: nb }));
        }
    }
}

/// Signed distance values for the known side of the boundary: pixels outside
/// the mask within the inpainting reach carry the negative of their distance
/// to the boundary ring, as the level-set weighting expects.
fn outward_distances(mask: &SealMask, radius: f64) -> Vec<f64> {
    let reach = radius.ceil() as u32 + 1;
    // Any pixel within Euclidean `radius` of a masked pixel lies inside this
    // halo, so every contributor the disc scan can visit gets a distance.
    let halo = dilate(mask, 2 * reach + 1, 1).expect("kernel 2*reach+1 is odd");
    let width = mask.width() as usize;
    let height = mask.height() as usize;
    let n = width * height;
    let mut flags = vec![Flag::Known; n];
    // Mask interior and far-outside pixels are walled off with the sentinel
    // so they never act as upwind sources for the outward march.
    let mut t = vec![T_LARGE; n];
    let mut heap = BinaryHeap::new();
    for ((flag, &in_halo), &in_mask) in flags.iter_mut().zip(halo.bits()).zip(mask.bits()) {
        if in_halo && !in_mask {
            *flag = Flag::Inside;
        }
    }
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if flags[i] != Flag::Inside {
                continue;
            }
            let touches_mask = (x > 0 && mask.bits()[i - 1])
                || (x + 1 < width && mask.bits()[i + 1])
                || (y > 0 && mask.bits()[i - width])
                || (y + 1 < height && mask.bits()[i + width]);
            if touches_mask {
                flags[i] = Flag::Band;
                t[i] = 0.0;
                heap.push(std::cmp::Reverse(FrontPixel { t: 0.0, idx: i }));
            }
        }
    }
    let mut state = Marcher {
        width,
        height,
        flags,
        t,
        heap,
    };
    while let Some(p) = state.pop_front() {
        relax_around(&mut state, p);
    }
    let mut field = vec![0.0; n];
    for (((out, &dist), &in_halo), &in_mask) in field
        .iter_mut()
        .zip(&state.t)
        .zip(halo.bits())
        .zip(mask.bits())
    {
        if in_halo && !in_mask && dist < T_LARGE {
            *out = -dist;
        }
    }
    field
}

/// Weighted-average reconstruction of one pixel from the valued pixels in
/// its radius. `parent` is the adjacent frozen pixel that discovered `p`;
/// it backs the (pathological) case of an empty contributor set.
fn estimate_pixel(out: &Image, state: &Marcher, p: usize, radius: f64, parent: usize) -> [u8; 3] {
    let w = state.width as i64;
    let h = state.height as i64;
    let (px, py) = ((p % state.width) as i64, (p / state.width) as i64);
    let (nx, ny) = state.front_normal(p);
    let r = radius.ceil() as i64;
    let r2 = radius * radius;
    let data = out.data();

    // Central-difference image gradient at q; a component is zero unless
    // both side pixels hold usable values.
    let grad = |q: usize, qx: i64, qy: i64, c: usize| -> (f64, f64) {
        let gx = if qx > 0 && qx + 1 < w && state.usable(q - 1) && state.usable(q + 1) {
            (data[(q + 1) * 3 + c] as f64 - data[(q - 1) * 3 + c] as f64) * 0.5
        } else {
            0.0
        };
        let gy = if qy > 0
            && qy + 1 < h
            && state.usable(q - state.width)
            && state.usable(q + state.width)
        {
            (data[(q + state.width) * 3 + c] as f64 - data[(q - state.width) * 3 + c] as f64) * 0.5
        } else {
            0.0
        };
        (gx, gy)
    };

    let mut num = [0.0f64; 3];
    let mut den = 0.0f64;
    for dy in -r..=r {
        let qy = py + dy;
        if qy < 0 || qy >= h {
            continue;
        }
        for dx in -r..=r {
            if dx == 0 && dy == 0 {
                continue;
            }
            let qx = px + dx;
            if qx < 0 || qx >= w {
                continue;
            }
            let d2 = (dx * dx + dy * dy) as f64;
            if d2 > r2 {
                continue;
            }
            let q = (qy * w + qx) as usize;
            if !state.usable(q) {
                continue;
            }
            let dist = d2.sqrt();
            // p - q = (-dx, -dy)
            let dir = ((nx * (-dx as f64) + ny * (-dy as f64)) / dist).max(DIR_EPSILON);
            let dst = 1.0 / d2;
            let lev = 1.0 / (1.0 + (state.t[p] - state.t[q]).abs());
            let weight = dir * dst * lev;
            den += weight;
            for c in 0..3 {
                let (gx, gy) = grad(q, qx, qy, c);
                let contrib = data[q * 3 + c] as f64 + gx * (-dx as f64) + gy * (-dy as f64);
                num[c] += weight * contrib;
            }
        }
    }

    if den > 0.0 {
        [0, 1, 2].map(|c| (num[c] / den).round().clamp(0.0, 255.0) as u8)
    } else {
        [0, 1, 2].map(|c| data[parent * 3 + c])
    }
}

/// Removes the masked region by marching the boundary inward and filling
/// each pixel from its already-valued neighborhood.
///
/// Pixels outside the mask are bit-identical between input and output, and
/// identical inputs always produce bit-identical results.
pub fn inpaint_fmm(img: &Image, mask: &SealMask, radius: f64) -> Result<Image, InpaintError> {
    assert!(radius >= 1.0, "inpainting radius must be >= 1");
    if img.width() == 0 || img.height() == 0 {
        return Err(InpaintError::EmptyImage);
    }
    if (img.width(), img.height()) != (mask.width(), mask.height()) {
        return Err(InpaintError::DimensionMismatch {
            img_w: img.width(),
            img_h: img.height(),
            mask_w: mask.width(),
            mask_h: mask.height(),
        });
    }
    let mut out = img.clone();
    if mask.is_empty() {
        return Ok(out);
    }

    let level_t = outward_distances(mask, radius);
    let mut state = Marcher::new(mask, level_t);
    while let Some(p) = state.pop_front() {
        for nb in state.neighbors4(p).into_iter().flatten() {
            if state.flags[nb] == Flag::Inside {
                let d = state.solve4(nb);
                state.t[nb] = d;
                let rgb = estimate_pixel(&out, &state, nb, radius, p);
                out.set_pixel((nb % state.width) as u32, (nb / state.width) as u32, rgb);
                state.flags[nb] = Flag::Band;
                state
                    .heap
                    .push(std::cmp::Reverse(FrontPixel { t: d, idx: nb }));
            }
        }
    }
    Ok(out)
}

/// Full restoration step: detect seal candidates, grow the mask, inpaint.
///
/// Returns the restored image together with the (dilated) mask actually
/// used, for reporting.
pub fn restore_document(
    img: &Image,
    params: &RestoreParams,
) -> Result<(Image, SealMask), RestoreError> {
    let raw = detect_seal_mask(img, params);
    let mask = dilate(&raw, params.kernel, params.iterations)?;
    let restored = inpaint_fmm(img, &mask, params.radius)?;
    Ok((restored, mask))
}
