//! spectramill: a four-stage neural pipeline for 1D spectra.
//!
//! The chain runs denoising, baseline removal, peak location, and peak
//! parameter retrieval, each stage a small 1D U-Net trained on synthetic
//! spectra. The crate ships the generator, the training objectives, a
//! reverse-mode engine sized for these models, the inference pipeline,
//! and the evaluation harness. See `examples/` for runnable entry points
//! into each piece; the `spectramill` binary wraps the same calls.

pub mod cli;
pub mod error;
pub mod eval;
pub mod losses;
pub mod nnet;
pub mod pipeline;
pub mod plot;
pub mod spectral;
pub mod synthgen;

pub use error::{Error, Result};
