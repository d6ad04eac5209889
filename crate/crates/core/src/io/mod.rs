//! File formats: PGM/PPM images, CSV reports and run records. Tensors use
//! the FTNS format from [`crate::numerics::ftns`].

mod config;
pub mod pnm;
mod table;

use std::path::Path;

pub use config::RunConfig;
pub use pnm::{read_pnm, write_pnm};
pub use table::{fmt_f64, write_csv};

use crate::error::Result;
use crate::numerics::{load_ftns, RealTensor};

/// Loads an image or tensor by extension: `.pgm`/`.ppm` through the PNM
/// decoder, anything else as FTNS.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<RealTensor> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("pgm" | "ppm" | "pnm") => read_pnm(path),
        _ => load_ftns(path),
    }
}
