//! CT artifact reduction toolkit.
//!
//! The crate covers the full desk-scale workflow for reducing noise, ring,
//! and zinger artifacts in parallel-beam CT:
//!
//! * [`stacks`] — projection / sinogram / volume containers,
//! * [`rng`] — deterministic random number generation,
//! * [`io`] — raw-float persistence with JSON sidecars and dataset manifests,
//! * [`geometry`] — rearrangement, forward projection, filtered backprojection,
//!   angle subsampling, sinogram upsampling, and circular masking,
//! * [`phantom`] — synthetic foam cylinder generation,
//! * [`degrade`] — Poisson noise, ring, and zinger simulators plus flat-field
//!   correction,
//! * [`classical`] — median outlier removal, wavelet–Fourier ring removal,
//!   median denoising, and a grid-search tuner,
//! * [`learn`] — a small trainable convolutional image-to-image regressor,
//! * [`multistage`] — the three-stage artifact reduction pipeline and the
//!   single-network post-processing baseline,
//! * [`metrics`] — MSE / PSNR / SSIM reports,
//! * [`pipeline`] — experiment configuration and the command implementations
//!   behind the CLI.

pub mod classical;
pub mod degrade;
pub mod error;
pub mod geometry;
pub mod io;
pub mod learn;
pub mod metrics;
pub mod multistage;
pub mod phantom;
pub mod pipeline;
pub mod rng;
pub mod stacks;
pub mod wavelet;

pub use error::{Error, Result};
pub use rng::Rng;
pub use stacks::{ProjectionStack, SinogramStack, Volume};
