//! boxdistill — bottom-up object evidence and objectness distillation for
//! weakly-supervised detection, at desk scale.
//!
//! The crate implements the supervision side of a weakly-supervised object
//! detector: given region proposals and image-level labels only, it scores
//! proposals with bottom-up evidence computed from the image itself, blends
//! those scores with top-down classifier confidence under a decaying impact
//! factor, mines pseudo ground truth for a cascade of refinement branches,
//! and selects bounding-box regression targets by objectness. A synthetic
//! training harness with linear score heads over handcrafted region features
//! runs the whole loop end to end without a CNN.
//!
//! Pipeline stages:
//!
//! 1. **geometry** – boxes, IoU, greedy NMS, offset encode/apply.
//! 2. **segmentation** – graph-based superpixels for the straddling cue.
//! 3. **evidence** – SS / CC / ED / MS bottom-up evidence per proposal.
//! 4. **objectness** – top-down confidence, the adaptive combination and
//!    its decay schedules.
//! 5. **mining** – seed/neighbor pseudo-ground-truth labeling and
//!    regression-reference selection.
//! 6. **losses** – the training objectives with analytic gradients.
//! 7. **harness** – synthetic scenes, linear heads, the training loop and
//!    CorLoc/mAP evaluation.
//! 8. **formats** – line-delimited interchange files and run manifests.

pub mod error;
pub mod evidence;
pub mod formats;
pub mod geometry;
pub mod harness;
pub mod losses;
pub mod mat;
pub mod mining;
pub mod objectness;
pub mod raster;
pub mod segmentation;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use geometry::{apply_offsets, encode_offsets, iou, nms, BoundingBox, ProposalSet};
pub use raster::ImageRaster;
pub use segmentation::{segment, SuperpixelMap};
