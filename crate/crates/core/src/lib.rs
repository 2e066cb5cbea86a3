//! Video coding for machines: pixel and keypoint-feature streams coded
//! jointly, with feature-tensor packing, a scalable enhancement layer and
//! rate-distortion tooling.
//!
//! The main entry points:
//!
//! * [`model`] for tensors, frames, clips and keypoints, plus their file formats
//! * [`packing`] to turn feature tensors into codec-ready planes and back
//! * [`codec`] for the block-based luma codec
//! * [`keypoints`] for keypoint quantization and the lossless `B_F` stream
//! * [`generator`] for the keypoint-driven predictive pipeline and enhancement layer
//! * [`container`] for the `VCM1` multiplexed file
//! * [`rd`] for RD curves, BD-rate and budget allocation
//! * [`metrics`] for PSNR, SSIM, rates and feature fidelity
//! * [`cli`] for the `vcm` command-line front end

pub mod bits;
pub mod cli;
pub mod codec;
pub mod container;
pub mod error;
pub mod generator;
pub mod keypoints;
pub mod metrics;
pub mod model;
pub mod packing;
pub mod rd;
pub mod synthetic;
mod wire;

pub use error::{Error, Result, StreamKind};
