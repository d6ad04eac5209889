//! Loss response to circular shifts of an image against itself.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::losses::{self, FdlConfig};
use crate::numerics::RealTensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CurveLoss {
    Mse,
    /// FDL with the configured λ.
    Fdl,
    /// FDL with λ = 0 (amplitude term only).
    FdlAmplitude,
    SpatialSwd,
}

impl CurveLoss {
    pub const ALL: [CurveLoss; 4] = [CurveLoss::Mse, CurveLoss::Fdl, CurveLoss::FdlAmplitude, CurveLoss::SpatialSwd];

    pub fn as_str(self) -> &'static str {
        match self {
            CurveLoss::Mse => "mse",
            CurveLoss::Fdl => "fdl",
            CurveLoss::FdlAmplitude => "fdl_amp",
            CurveLoss::SpatialSwd => "spatial_swd",
        }
    }
}

impl fmt::Display for CurveLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CurveLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CurveLoss::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown curve loss {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub kind: CurveLoss,
    pub shift: usize,
    pub value: f64,
    /// `value / value(shift = 1)`; 0 when the shift-1 response is 0.
    pub normalized: f64,
}

fn evaluate(kind: CurveLoss, a: &RealTensor, b: &RealTensor, cfg: &FdlConfig) -> Result<f64> {
    match kind {
        CurveLoss::Mse => losses::mse_value(a, b),
        CurveLoss::Fdl => losses::fdl_value(a, b, cfg, 0),
        CurveLoss::FdlAmplitude => {
            let amp_only = FdlConfig {
                lambda: 0.0,
                ..cfg.clone()
            };
            losses::fdl_value(a, b, &amp_only, 0)
        }
        CurveLoss::SpatialSwd => losses::spatial_swd_value(a, b, cfg, 0),
    }
}

/// Loss between `image` and its circular shift along the last axis for every
/// shift in `0..=max_shift`. All evaluations use `eval_id` 0, so stochastic
/// losses see the same projection banks at every shift.
pub fn shift_curve(image: &RealTensor, kinds: &[CurveLoss], max_shift: usize, cfg: &FdlConfig) -> Result<Vec<CurveRow>> {
    let shape = image.shape();
    if shape.len() < 2 {
        return Err(Error::shape("shift_curve", shape, "expected an image with two spatial axes"));
    }
    let extent = shape[shape.len() - 2].min(shape[shape.len() - 1]);
    if max_shift == 0 || 2 * max_shift >= extent {
        return Err(Error::InvalidArgument(format!(
            "max shift must be in 1..{} for extent {extent}",
            extent.div_ceil(2)
        )));
    }
    let axis = shape.len() - 1;
    let shifted: Vec<RealTensor> = (0..=max_shift)
        .map(|s| image.roll(axis, s as isize))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(kinds.len() * (max_shift + 1));
    for &kind in kinds {
        let values: Vec<f64> = shifted
            .iter()
            .map(|s| evaluate(kind, image, s, cfg))
            .collect::<Result<_>>()?;
        let unit = values[1];
        rows.extend(values.iter().enumerate().map(|(shift, &value)| CurveRow {
            kind,
            shift,
            value,
            normalized: if unit == 0.0 { 0.0 } else { value / unit },
        }));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::synthetic_scene;

    #[test]
    fn row_count_and_zero_shift() {
        let img = synthetic_scene(1, 16, 16, 0).unwrap();
        let cfg = FdlConfig {
            projections: 16,
            ..FdlConfig::default()
        };
        let rows = shift_curve(&img, &CurveLoss::ALL, 4, &cfg).unwrap();
        assert_eq!(rows.len(), 4 * 5);
        for r in &rows {
            if r.shift == 0 {
                assert_eq!(r.value, 0.0);
            }
            if r.kind == CurveLoss::FdlAmplitude {
                assert!(r.value < 1e-10);
            }
            if r.kind == CurveLoss::Mse && r.shift == 1 {
                assert_eq!(r.normalized, 1.0);
            }
        }
    }

    #[test]
    fn rejects_large_shift() {
        let img = RealTensor::zeros(&[1, 8, 8]);
        assert!(shift_curve(&img, &[CurveLoss::Mse], 4, &FdlConfig::default()).is_err());
        assert!(shift_curve(&img, &[CurveLoss::Mse], 0, &FdlConfig::default()).is_err());
        assert!(shift_curve(&img, &[CurveLoss::Mse], 3, &FdlConfig::default()).is_ok());
    }

    #[test]
    fn names_round_trip() {
        for k in CurveLoss::ALL {
            assert_eq!(k.as_str().parse::<CurveLoss>().unwrap(), k);
        }
    }
}
