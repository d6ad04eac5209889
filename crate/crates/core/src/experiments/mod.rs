//! Desk-scale studies: misaligned 1-D training, shift response curves and
//! style transfer, plus test images and PSNR.

mod images;
pub mod shift;
pub mod style;
pub mod toy1d;

pub use images::{resize_bilinear, synthetic_scene};
pub use shift::{shift_curve, CurveLoss, CurveRow};
pub use style::{style_transfer, StyleOptions, StyleResult, TraceRow};
pub use toy1d::{gen_toy1d, train_toy1d, LossKind, Toy1dDataset, Toy1dOptions, ToyModel, TrainReport};

use crate::error::Result;
use crate::losses;
use crate::numerics::RealTensor;

/// Peak signal-to-noise ratio in dB for images in `[0, 1]`;
/// `f64::INFINITY` for identical inputs.
pub fn psnr(u: &RealTensor, v: &RealTensor) -> Result<f64> {
    let mse = losses::mse_value(u, v)?;
    Ok(if mse == 0.0 { f64::INFINITY } else { -10.0 * mse.log10() })
}
