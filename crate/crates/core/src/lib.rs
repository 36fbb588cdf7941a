//! Restoration of hyperspectral data cubes corrupted by mixed noise
//! (Gaussian, salt-and-pepper impulses, dead lines, stripes).
//!
//! The restored cube is modeled as a low-multilinear-rank Tucker
//! decomposition that is additionally piecewise smooth in both spatial
//! directions and along the spectrum; sparse corruptions are separated by an
//! `l1` term and, optionally, dense Gaussian noise by a Frobenius term. The
//! resulting objective is minimized with an augmented Lagrange multiplier
//! scheme whose subproblems are closed-form: a HOOI Tucker step, an
//! FFT-diagonalized linear solve, and soft thresholding.
//!
//! Module map:
//! * [`cube`] - dense third-order tensors and their algebra,
//! * [`fft`] - arbitrary-length 3-D DFT,
//! * [`diff`] - circular difference operators and the TV seminorm,
//! * [`tucker`] - truncated SVD and HOOI,
//! * [`solver`] - the alternating restoration loop,
//! * [`noise`] - seeded mixed-noise simulation,
//! * [`metrics`] - PSNR / SSIM / ERGAS and mean profiles.
//!
//! The crate is `no_std`-compatible (with `alloc`) when built without the
//! default `std` feature.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod cube;
pub mod diff;
pub mod error;
pub mod fft;
pub mod metrics;
pub mod noise;
pub mod solver;
pub mod tucker;

mod math;

pub use cube::{Cube, TuckerFactors};
pub use diff::{StackedGrad, TVWeights};
pub use error::{CoreError, CoreResult};
pub use fft::SpectralCube;
pub use metrics::{MetricsReport, ProfileAxis};
pub use noise::{NoiseMasks, NoiseSpec};
pub use solver::{ModelKind, RestoreReport, SolverConfig, SolverState};
