//! Frequency distribution loss: sliced Wasserstein distances between the
//! amplitude and phase spectra of image features, plus the small autodiff,
//! transform and transport machinery it needs and a set of desk-scale
//! experiments built on top.

pub mod error;
pub mod experiments;
pub mod cli;
pub mod features;
pub mod io;
pub mod losses;
pub mod numerics;
pub mod rng;
pub mod spectral;
pub mod transport;

pub use error::{Error, Result};
