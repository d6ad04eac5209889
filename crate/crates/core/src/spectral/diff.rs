//! Differentiable spectral operations. Complex values on the tape are packed
//! as a `2×…` tensor: slab 0 holds real parts (or amplitudes), slab 1 holds
//! imaginary parts (or phases).

use super::{forward_real, inverse_real_part, polar_of, symmetry_deviation, symmetry_tolerance, DftAxes};
use crate::error::{Error, Result};
use crate::numerics::{Backward, RealTensor, Tape, Var};

/// Denominator floor for amplitude and phase derivatives near the origin.
pub const POLAR_EPS: f64 = 1e-8;

fn packed_shape(shape: &[usize]) -> Vec<usize> {
    let mut s = Vec::with_capacity(shape.len() + 1);
    s.push(2);
    s.extend_from_slice(shape);
    s
}

fn pack(shape: &[usize], a: Vec<f64>, b: Vec<f64>) -> RealTensor {
    let mut data = a;
    data.extend(b);
    RealTensor::new(packed_shape(shape), data).expect("packed layout")
}

fn unpacked_shape(t: &RealTensor, op: &'static str) -> Result<Vec<usize>> {
    match t.shape() {
        [2, rest @ ..] if !rest.is_empty() => Ok(rest.to_vec()),
        other => Err(Error::shape(op, other, "expected a packed 2×… complex tensor")),
    }
}

fn halves(t: &RealTensor) -> (&[f64], &[f64]) {
    t.data().split_at(t.numel() / 2)
}

struct DftRule {
    h: usize,
    w: usize,
}

impl Backward for DftRule {
    fn name(&self) -> &'static str {
        "dft"
    }

    fn backward(&self, _inputs: &[&RealTensor], _output: &RealTensor, grad: &RealTensor) -> Vec<Option<RealTensor>> {
        // ∂Re X[k]/∂x[n] = cos θ, ∂Im X[k]/∂x[n] = −sin θ, so the input
        // gradient is Re of the unscaled inverse transform of (g_re + i·g_im).
        let (gr, gi) = halves(grad);
        let gx = inverse_real_part(gr, gi, self.h, self.w);
        let shape = &grad.shape()[1..];
        vec![Some(RealTensor::new(shape.to_vec(), gx).expect("input shape"))]
    }
}

/// Forward transform of real `x`, producing a packed spectrum.
pub fn dft(tape: &mut Tape, x: Var, axes: DftAxes) -> Result<Var> {
    let shape = tape.shape(x).to_vec();
    let (h, w) = axes.plane(&shape)?;
    let (re, im) = forward_real(tape.value(x).data(), h, w);
    Ok(tape.custom(&[x], pack(&shape, re, im), Box::new(DftRule { h, w })))
}

struct IdftRule {
    h: usize,
    w: usize,
}

impl Backward for IdftRule {
    fn name(&self) -> &'static str {
        "idft"
    }

    fn backward(&self, inputs: &[&RealTensor], _output: &RealTensor, grad: &RealTensor) -> Vec<Option<RealTensor>> {
        // Output is Re((1/N)·Σₖ X[k]·e^{iθ}); its adjoint is (1/N)·DFT(g).
        let n = (self.h * self.w) as f64;
        let mut re = grad.data().to_vec();
        let mut im = vec![0.0; re.len()];
        super::fft::transform_planes(&mut re, &mut im, self.h, self.w, false);
        re.iter_mut().chain(im.iter_mut()).for_each(|v| *v /= n);
        vec![Some(pack(&inputs[0].shape()[1..], re, im))]
    }
}

/// Inverse transform of a packed spectrum back to a real tensor.
pub fn idft(tape: &mut Tape, spectrum: Var, axes: DftAxes) -> Result<Var> {
    let value = tape.value(spectrum);
    let shape = unpacked_shape(value, "idft")?;
    let (h, w) = axes.plane(&shape)?;
    let (re, im) = halves(value);
    let deviation = symmetry_deviation(re, im, h, w);
    let tolerance = symmetry_tolerance(re, im);
    if deviation > tolerance {
        return Err(Error::AsymmetricSpectrum { deviation, tolerance });
    }
    let n = (h * w) as f64;
    let data = inverse_real_part(re, im, h, w).into_iter().map(|v| v / n).collect();
    let out = RealTensor::new(shape, data)?;
    Ok(tape.custom(&[spectrum], out, Box::new(IdftRule { h, w })))
}

struct ToPolarRule;

impl Backward for ToPolarRule {
    fn name(&self) -> &'static str {
        "to_polar"
    }

    fn backward(&self, inputs: &[&RealTensor], output: &RealTensor, grad: &RealTensor) -> Vec<Option<RealTensor>> {
        let (re, im) = halves(inputs[0]);
        let (amp, _) = halves(output);
        let (ga, gp) = halves(grad);
        let n = re.len();
        let mut g_re = vec![0.0; n];
        let mut g_im = vec![0.0; n];
        for k in 0..n {
            let a = amp[k].max(POLAR_EPS);
            let a2 = a * a;
            g_re[k] = ga[k] * re[k] / a - gp[k] * im[k] / a2;
            g_im[k] = ga[k] * im[k] / a + gp[k] * re[k] / a2;
        }
        vec![Some(pack(&inputs[0].shape()[1..], g_re, g_im))]
    }
}

/// Packed `(re, im)` → packed `(amplitude, phase)`.
pub fn to_polar(tape: &mut Tape, spectrum: Var) -> Result<Var> {
    let value = tape.value(spectrum);
    let shape = unpacked_shape(value, "to_polar")?;
    let (re, im) = halves(value);
    let (amp, phase) = re.iter().zip(im).map(|(&r, &i)| polar_of(r, i)).unzip();
    Ok(tape.custom(&[spectrum], pack(&shape, amp, phase), Box::new(ToPolarRule)))
}

struct FromPolarRule;

impl Backward for FromPolarRule {
    fn name(&self) -> &'static str {
        "from_polar"
    }

    fn backward(&self, inputs: &[&RealTensor], _output: &RealTensor, grad: &RealTensor) -> Vec<Option<RealTensor>> {
        let (amp, phase) = halves(inputs[0]);
        let (gr, gi) = halves(grad);
        let n = amp.len();
        let mut g_a = vec![0.0; n];
        let mut g_p = vec![0.0; n];
        for k in 0..n {
            let (s, c) = phase[k].sin_cos();
            g_a[k] = gr[k] * c + gi[k] * s;
            g_p[k] = amp[k] * (gi[k] * c - gr[k] * s);
        }
        vec![Some(pack(&inputs[0].shape()[1..], g_a, g_p))]
    }
}

/// Packed `(amplitude, phase)` → packed `(re, im)`.
pub fn from_polar(tape: &mut Tape, polar: Var) -> Result<Var> {
    let value = tape.value(polar);
    let shape = unpacked_shape(value, "from_polar")?;
    let (amp, phase) = halves(value);
    let (re, im) = amp
        .iter()
        .zip(phase)
        .map(|(&a, &p)| (a * p.cos(), a * p.sin()))
        .unzip();
    Ok(tape.custom(&[polar], pack(&shape, re, im), Box::new(FromPolarRule)))
}

/// Amplitude and phase tensors (each shaped like `x`) of the spectrum of `x`.
pub fn amplitude_phase(tape: &mut Tape, x: Var, axes: DftAxes) -> Result<(Var, Var)> {
    let spectrum = dft(tape, x, axes)?;
    let polar = to_polar(tape, spectrum)?;
    Ok((tape.select(polar, 0)?, tape.select(polar, 1)?))
}
