//! One-dimensional class-dependence feature analysis (1D-CFA).
//!
//! Face vectors are reduced with PCA, moved to the frequency domain with a 1D
//! DFT, and passed through one correlation filter per class; the origin
//! correlation outputs, max-normalized, form the feature used by a nearest
//! neighbour classifier.
//!
//! The filters provided are the unconstrained optimal origin tradeoff filter
//! (UOOTF), its kernel extension (KUOOTF), and the OTF and UOTF baselines.

pub mod data;
pub mod error;
pub mod features;
pub mod filterbank;
pub mod kernelcfa;
pub mod linalg;
pub mod pipeline;
pub mod rng;
pub mod spectral;
pub mod subspace;

pub use error::{Error, Result};
