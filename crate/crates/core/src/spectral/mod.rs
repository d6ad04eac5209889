//! Discrete Fourier transforms, polar decomposition and amplitude/phase mixing.
//!
//! Conventions: the forward transform is unnormalized,
//! `X[k] = Σₙ x[n]·exp(−2πi·k·n/N)` per axis, and the inverse carries the
//! `1/N` factor. Spectra cover the full frequency grid.

pub mod diff;
mod fft;

use std::f64::consts::PI;

pub use fft::{naive_dft, FftPlan};

use crate::error::{Error, Result};
use crate::numerics::RealTensor;

/// Which trailing axes a transform acts on; leading axes are independent
/// channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DftAxes {
    Last1,
    Last2,
}

impl DftAxes {
    /// Last axis for 1-D tensors, last two otherwise.
    pub fn for_shape(shape: &[usize]) -> Self {
        if shape.len() <= 1 {
            DftAxes::Last1
        } else {
            DftAxes::Last2
        }
    }

    /// `(h, w)` of one transformed plane; 1-D transforms use `h == 1`.
    pub fn plane(self, shape: &[usize]) -> Result<(usize, usize)> {
        match (self, shape) {
            (DftAxes::Last1, [.., w]) => Ok((1, *w)),
            (DftAxes::Last2, [.., h, w]) => Ok((*h, *w)),
            _ => Err(Error::shape("dft", shape, format!("rank too small for {self:?}"))),
        }
    }
}

/// Complex spectrum of a real tensor over the full grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub shape: Vec<usize>,
    pub axes: DftAxes,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// Amplitude/phase form of a [`Spectrum`]; phase lies in `(−π, π]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarSpectrum {
    pub shape: Vec<usize>,
    pub axes: DftAxes,
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
}

/// True when frequency `k` is its own mirror `−k mod n`.
fn self_conjugate(k: usize, n: usize) -> bool {
    (2 * k).is_multiple_of(n)
}

/// Forward transform of split buffers with exact realness at self-conjugate
/// bins (DC and Nyquist rows/columns), where the imaginary part of a real
/// signal's spectrum vanishes identically.
pub(crate) fn forward_real(data: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let mut re = data.to_vec();
    let mut im = vec![0.0; data.len()];
    fft::transform_planes(&mut re, &mut im, h, w, false);
    for plane in im.chunks_mut(h * w) {
        for ky in (0..h).filter(|&ky| self_conjugate(ky, h)) {
            for kx in (0..w).filter(|&kx| self_conjugate(kx, w)) {
                plane[ky * w + kx] = 0.0;
            }
        }
    }
    (re, im)
}

/// `Re(Σₖ X[k]·exp(+2πi·k·n/N))` without the `1/N` factor.
pub(crate) fn inverse_real_part(re: &[f64], im: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut r = re.to_vec();
    let mut i = im.to_vec();
    fft::transform_planes(&mut r, &mut i, h, w, true);
    r
}

/// Largest `|X[k] − conj(X[−k])|` component over all planes.
pub(crate) fn symmetry_deviation(re: &[f64], im: &[f64], h: usize, w: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for (pre, pim) in re.chunks(h * w).zip(im.chunks(h * w)) {
        for ky in 0..h {
            let my = (h - ky) % h;
            for kx in 0..w {
                let mx = (w - kx) % w;
                let (a, b) = (ky * w + kx, my * w + mx);
                worst = worst.max((pre[a] - pre[b]).abs()).max((pim[a] + pim[b]).abs());
            }
        }
    }
    worst
}

pub(crate) fn symmetry_tolerance(re: &[f64], im: &[f64]) -> f64 {
    let scale = re
        .iter()
        .zip(im)
        .map(|(r, i)| r.hypot(*i))
        .fold(1.0, f64::max);
    1e-8 * scale
}

pub(crate) fn polar_of(re: f64, im: f64) -> (f64, f64) {
    let amplitude = re.hypot(im);
    let phase = if amplitude == 0.0 { 0.0 } else { im.atan2(re) + 0.0 };
    (amplitude, if phase == -PI { PI } else { phase })
}

pub fn dft(x: &RealTensor, axes: DftAxes) -> Result<Spectrum> {
    let (h, w) = axes.plane(x.shape())?;
    let (re, im) = forward_real(x.data(), h, w);
    Ok(Spectrum {
        shape: x.shape().to_vec(),
        axes,
        re,
        im,
    })
}

/// Inverse transform; rejects spectra that are not conjugate-symmetric to
/// `1e-8` relative to the largest coefficient magnitude.
pub fn idft(s: &Spectrum) -> Result<RealTensor> {
    let (h, w) = s.axes.plane(&s.shape)?;
    let deviation = symmetry_deviation(&s.re, &s.im, h, w);
    let tolerance = symmetry_tolerance(&s.re, &s.im);
    if deviation > tolerance {
        return Err(Error::AsymmetricSpectrum { deviation, tolerance });
    }
    let n = (h * w) as f64;
    let data = inverse_real_part(&s.re, &s.im, h, w)
        .into_iter()
        .map(|v| v / n)
        .collect();
    RealTensor::new(s.shape.clone(), data)
}

pub fn to_polar(s: &Spectrum) -> PolarSpectrum {
    let (amplitude, phase) = s.re.iter().zip(&s.im).map(|(&r, &i)| polar_of(r, i)).unzip();
    PolarSpectrum {
        shape: s.shape.clone(),
        axes: s.axes,
        amplitude,
        phase,
    }
}

pub fn from_polar(p: &PolarSpectrum) -> Spectrum {
    let (re, im) = p
        .amplitude
        .iter()
        .zip(&p.phase)
        .map(|(&a, &ph)| (a * ph.cos(), a * ph.sin()))
        .unzip();
    Spectrum {
        shape: p.shape.clone(),
        axes: p.axes,
        re,
        im,
    }
}

/// Combines the amplitude spectrum of `q` with the phase spectrum of `d` and
/// transforms back, per channel over the trailing spatial axes.
pub fn mix_frequency(q: &RealTensor, d: &RealTensor) -> Result<RealTensor> {
    q.ensure_same_shape(d, "mix_frequency")?;
    let axes = DftAxes::for_shape(q.shape());
    let amp = to_polar(&dft(q, axes)?);
    let pha = to_polar(&dft(d, axes)?);
    let mixed = PolarSpectrum {
        amplitude: amp.amplitude,
        ..pha
    };
    idft(&from_polar(&mixed))
}
