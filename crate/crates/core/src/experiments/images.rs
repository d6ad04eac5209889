//! Deterministic test images and resampling.

use std::f64::consts::PI;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::numerics::RealTensor;
use crate::rng;

/// A `channels×h×w` image in `[0, 1]` with the broad traits of a photograph:
/// a smooth illumination gradient, several soft-edged shapes of different
/// colours, and faint low-frequency texture. Fully determined by `seed`.
pub fn synthetic_scene(channels: usize, h: usize, w: usize, seed: u64) -> Result<RealTensor> {
    if channels == 0 || h == 0 || w == 0 {
        return Err(Error::InvalidArgument("image extents must be positive".into()));
    }
    let mut r = rng::seeded(seed);
    let (hf, wf) = (h as f64, w as f64);
    let mut img = vec![0.0; channels * h * w];

    let base: Vec<f64> = (0..channels).map(|_| r.random_range(0.2..0.5)).collect();
    let tilt: Vec<(f64, f64)> = (0..channels)
        .map(|_| (r.random_range(-0.2..0.2), r.random_range(-0.2..0.2)))
        .collect();
    for c in 0..channels {
        for y in 0..h {
            for x in 0..w {
                img[(c * h + y) * w + x] = base[c] + tilt[c].0 * y as f64 / hf + tilt[c].1 * x as f64 / wf;
            }
        }
    }

    // Discs and rectangles with a one-pixel logistic edge.
    let shapes = 7;
    for _ in 0..shapes {
        let cy = r.random_range(0.0..hf);
        let cx = r.random_range(0.0..wf);
        let size = r.random_range(0.08..0.25) * hf.min(wf);
        let disc = r.random_bool(0.5);
        let colour: Vec<f64> = (0..channels).map(|_| r.random_range(0.0..1.0)).collect();
        for y in 0..h {
            for x in 0..w {
                let (dy, dx) = (y as f64 - cy, x as f64 - cx);
                let dist = if disc {
                    (dy * dy + dx * dx).sqrt() - size
                } else {
                    dy.abs().max(dx.abs()) - size
                };
                let alpha = 1.0 / (1.0 + (dist / 0.75).exp());
                for (c, &col) in colour.iter().enumerate() {
                    let p = &mut img[(c * h + y) * w + x];
                    *p = (1.0 - alpha) * *p + alpha * col;
                }
            }
        }
    }

    // Sum of a few random plane waves per channel.
    for c in 0..channels {
        for _ in 0..6 {
            let fy = r.random_range(1..6) as f64;
            let fx = r.random_range(1..6) as f64;
            let phase = r.random_range(0.0..2.0 * PI);
            let amp = r.random_range(0.005..0.02);
            for y in 0..h {
                for x in 0..w {
                    let arg = 2.0 * PI * (fy * y as f64 / hf + fx * x as f64 / wf) + phase;
                    img[(c * h + y) * w + x] += amp * arg.sin();
                }
            }
        }
    }

    img.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    RealTensor::new(vec![channels, h, w], img)
}

/// Bilinear resampling of a `C×H×W` image with pixel-centre alignment and
/// edge clamping.
pub fn resize_bilinear(img: &RealTensor, h: usize, w: usize) -> Result<RealTensor> {
    let &[c, ih, iw] = img.shape() else {
        return Err(Error::shape("resize", img.shape(), "expected a C×H×W image"));
    };
    if h == 0 || w == 0 {
        return Err(Error::InvalidArgument("target extents must be positive".into()));
    }
    if (ih, iw) == (h, w) {
        return Ok(img.clone());
    }
    let axis = |out: usize, inp: usize| -> Vec<(usize, usize, f64)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (inp - 1) as f64);
                let lo = src.floor() as usize;
                let hi = (lo + 1).min(inp - 1);
                (lo, hi, src - lo as f64)
            })
            .collect()
    };
    let ys = axis(h, ih);
    let xs = axis(w, iw);
    let src = img.data();
    let mut out = Vec::with_capacity(c * h * w);
    for ch in 0..c {
        let plane = &src[ch * ih * iw..(ch + 1) * ih * iw];
        for &(y0, y1, ty) in &ys {
            for &(x0, x1, tx) in &xs {
                let top = plane[y0 * iw + x0] * (1.0 - tx) + plane[y0 * iw + x1] * tx;
                let bottom = plane[y1 * iw + x0] * (1.0 - tx) + plane[y1 * iw + x1] * tx;
                out.push(top * (1.0 - ty) + bottom * ty);
            }
        }
    }
    RealTensor::new(vec![c, h, w], out)
}
