//! Dense tensors, a reverse-mode tape, convolution and the Adam optimizer.

mod adam;
mod conv;
pub mod ftns;
mod tape;
mod tensor;

pub use adam::{adam_step, Adam, AdamState};
pub use conv::{ConvGeometry, Padding};
pub use ftns::{load_ftns, save_ftns};
pub use tape::{Backward, Gradients, Tape, Var};
pub use tensor::RealTensor;
