//! Offline signature verification pipeline: shell-contour preprocessing,
//! pair/triplet dataset construction, siamese metric learning with
//! contrastive and triplet losses, and cross-dataset ROC/AUC evaluation.
//!
//! The crate is organized along the pipeline stages:
//!
//! - [`raster`]: grayscale/binary raster types and the deterministic
//!   pre-processing chain (OTSU, bounding box, crop, resize, morphology).
//! - [`shells`]: shell ribbon extraction, functional 1D contours,
//!   pseudo-pressure, thickness, and CSV export.
//! - [`dataset`]: dataset scanning, writer-disjoint splits, pair/triplet
//!   generation, and a synthetic signature generator.
//! - [`augment`]: training-time image augmentations.
//! - [`nn`]: a small deterministic f64 neural stack with reverse-mode
//!   gradients and the SGD/momentum/Adam optimizers.
//! - [`metric`]: distances, losses, the shell/pressure embedding networks,
//!   and the training loop.
//! - [`eval`]: threshold classification, confusion metrics, ROC, AUC, and
//!   cross-dataset reports.
//! - [`cli`]: the `sigshell` command-line entry points.

pub mod augment;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod eval;
pub mod metric;
pub mod nn;
pub mod raster;
pub mod shells;
