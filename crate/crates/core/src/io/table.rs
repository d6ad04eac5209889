//! CSV reports: header row, comma separators, floats with 17 significant
//! digits so every value reads back bit-exactly.

use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};

/// Round-trip exact float text; non-finite values print as `inf`, `-inf`, `NaN`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let path = path.as_ref();
    let wrap = |e: csv::Error| Error::from(std::io::Error::other(e)).in_file(path);
    let file = File::create(path).map_err(|e| Error::from(e).in_file(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::InvalidArgument(format!(
                "row has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        w.write_record(row).map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::from(e).in_file(path))
}
