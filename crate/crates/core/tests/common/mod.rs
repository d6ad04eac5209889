#![allow(dead_code)]

pub mod grad_cases;

use fdl::numerics::{RealTensor, Tape, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(r: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> RealTensor {
    let n = shape.iter().product();
    RealTensor::new(shape.to_vec(), (0..n).map(|_| r.random_range(lo..hi)).collect()).unwrap()
}

/// Central differences of `f` at `x`.
pub fn numeric_grad(f: &dyn Fn(&RealTensor) -> f64, x: &RealTensor) -> RealTensor {
    let mut g = RealTensor::zeros(x.shape());
    let mut probe = x.clone();
    for i in 0..x.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + FD_STEP;
        let up = f(&probe);
        probe.data_mut()[i] = orig - FD_STEP;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        g.data_mut()[i] = (up - down) / (2.0 * FD_STEP);
    }
    g
}

fn norm(t: &RealTensor) -> f64 {
    t.data().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the absolute difference norm when both
/// vanish.
pub fn rel_err(a: &RealTensor, b: &RealTensor) -> f64 {
    let diff = a.zip_map(b, "rel_err", |x, y| x - y).unwrap();
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

/// A scalar loss built on a tape from one parameter tensor.
pub type Build<'a> = dyn Fn(&mut Tape, Var) -> Var + 'a;

pub fn eval(build: &Build, x: &RealTensor) -> f64 {
    let mut tape = Tape::new();
    let v = tape.param(x.clone());
    let out = build(&mut tape, v);
    tape.value(out).item().unwrap()
}

pub fn tape_grad(build: &Build, x: &RealTensor) -> RealTensor {
    let mut tape = Tape::new();
    let v = tape.param(x.clone());
    let out = build(&mut tape, v);
    tape.backward(out).unwrap().wrt(&tape, v)
}

/// Relative error between the tape gradient and central differences.
pub fn fd_error(build: &Build, x: &RealTensor) -> f64 {
    let analytic = tape_grad(build, x);
    let numeric = numeric_grad(&|p| eval(build, p), x);
    rel_err(&analytic, &numeric)
}

/// Reduces a tensor-valued node to a scalar with fixed pseudo-random weights
/// so every output element contributes to the gradient.
pub fn project_to_scalar(tape: &mut Tape, out: Var, seed: u64) -> Var {
    let shape = tape.shape(out).to_vec();
    let w = uniform(&mut rng(seed), &shape, -1.0, 1.0);
    let wv = tape.constant(w);
    let prod = tape.mul(out, wv).unwrap();
    tape.sum(prod)
}

/// Direct sum over all index tuples of the DFT definition, per plane.
pub fn dft_oracle(x: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    use std::f64::consts::PI;
    let mut re = vec![0.0; x.len()];
    let mut im = vec![0.0; x.len()];
    for p in 0..x.len() / (h * w) {
        let base = p * h * w;
        for ky in 0..h {
            for kx in 0..w {
                let (mut sr, mut si) = (0.0, 0.0);
                for y in 0..h {
                    for xx in 0..w {
                        let t = -2.0 * PI * (((ky * y) % h) as f64 / h as f64 + ((kx * xx) % w) as f64 / w as f64);
                        sr += x[base + y * w + xx] * t.cos();
                        si += x[base + y * w + xx] * t.sin();
                    }
                }
                re[base + ky * w + kx] = sr;
                im[base + ky * w + kx] = si;
            }
        }
    }
    (re, im)
}

/// Brute-force matching oracle for equal-weight 1-D samples.
pub fn matching_oracle(a: &[f64], b: &[f64]) -> f64 {
    fn go(a: &[f64], b: &[f64], used: &mut Vec<bool>, i: usize, acc: f64, best: &mut f64) {
        if i == a.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                go(a, b, used, i + 1, acc + (a[i] - b[j]).abs(), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(a, b, &mut vec![false; b.len()], 0, 0.0, &mut best);
    best / a.len() as f64
}
