//! Compressive deconvolution: recover a reflectivity image from compressed
//! linear measurements of its blurred version, by operator splitting with
//! per-term proximal updates.
//!
//! The crate is organized around the forward model y = Phi H x + n:
//! [`conv`] holds the circulant blur H, [`measure`] the sampling operator
//! Phi, [`wavelet`] the orthonormal sparsifying transform, [`solver`] the
//! splitting iteration, [`phantom`] synthetic data generation and
//! [`metrics`] the evaluation and B-mode display path.

pub mod conv;
pub mod error;
mod fft2;
pub mod image;
pub mod io;
pub mod measure;
pub mod metrics;
pub mod phantom;
pub mod prox;
pub mod solver;
pub mod wavelet;

pub use error::{Error, Result};
pub use image::Image;
