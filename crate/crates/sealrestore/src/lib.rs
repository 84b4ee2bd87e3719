//! Restoration and evaluation toolkit for historical document images under
//! red-seal interference.
//!
//! Red collector seals frequently occlude characters in pre-modern Japanese
//! documents and degrade recognition. This crate provides the training-free
//! restoration step and the measurement harness around it:
//!
//! - [`mask`]: seal-candidate detection by channel-ratio thresholding, plus
//!   binary dilation to absorb ink bleed.
//! - [`inpaint`]: fast-marching inpainting that fills masked regions from
//!   surrounding texture.
//! - [`metrics`]: PSNR and windowed SSIM for scoring restorations.
//! - [`synth`]: seeded generation of seal-overlaid pages with ground-truth
//!   masks, for paired evaluation data.
//! - [`boxes`] / [`annot`]: character-box geometry, IoU matching against
//!   ground truth, confidence filtering, cropping, and the annotation file
//!   formats external detectors feed in.
//! - [`overlay`]: SVG rendering of recognized characters back onto the
//!   restored page.
//! - [`pipeline`]: batch orchestration, parameter sweeps, and run manifests.
//!
//! Detection and classification models are consumed as prediction files,
//! never embedded.

pub mod annot;
pub mod boxes;
pub mod inpaint;
pub mod mask;
pub mod metrics;
pub mod overlay;
pub mod pipeline;
pub mod raster;
pub mod synth;

pub use boxes::{BBox, Detection, GroundTruth};
pub use inpaint::{inpaint_fmm, restore_document, solve_eikonal};
pub use mask::{detect_seal_mask, dilate, RestoreParams, SealMask};
pub use metrics::{evaluate_set, mse, psnr, ssim, MetricsReport};
pub use overlay::{render_overlay, OverlayStyle};
pub use raster::{GrayImage, Image, ImageError};
pub use synth::{composite_seal, generate_synthetic, SealTemplate};
