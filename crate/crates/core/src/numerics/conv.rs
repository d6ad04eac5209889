//! Strided "same" convolution kernels (cross-correlation convention) for 1-D
//! and 2-D signals, with an optional leading batch axis.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Border handling for "same" convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Padding {
    /// Wrap around; keeps the operator exactly equivariant to circular shifts.
    #[default]
    Circular,
    Zero,
}

/// Resolved dimensions of one convolution. 1-D problems are stored as 2-D with
/// unit height.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub batched: bool,
    pub spatial_rank: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub sh: usize,
    pub sw: usize,
    pub padding: Padding,
}

impl ConvGeometry {
    pub fn resolve(input: &[usize], kernel: &[usize], stride: usize, padding: Padding) -> Result<Self> {
        let spatial_rank = match kernel.len() {
            3 => 1,
            4 => 2,
            _ => return Err(Error::shape("conv", kernel, "kernel must be C_out×C_in×k or C_out×C_in×k×k")),
        };
        let batched = match input.len() {
            r if r == spatial_rank + 1 => false,
            r if r == spatial_rank + 2 => true,
            _ => {
                return Err(Error::shape(
                    "conv",
                    input,
                    format!("signal rank incompatible with a {spatial_rank}-d kernel"),
                ))
            }
        };
        if stride == 0 {
            return Err(Error::InvalidArgument("conv: stride must be positive".into()));
        }
        let (batch, dims) = if batched {
            (input[0], &input[1..])
        } else {
            (1, input)
        };
        let c_in = dims[0];
        if kernel[1] != c_in {
            return Err(Error::mismatch("conv", input, kernel));
        }
        let (h, w) = if spatial_rank == 1 { (1, dims[1]) } else { (dims[1], dims[2]) };
        let (kh, kw) = if spatial_rank == 1 { (1, kernel[2]) } else { (kernel[2], kernel[3]) };
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::shape("conv", kernel, "kernel extent must be odd"));
        }
        let (sh, sw) = if spatial_rank == 1 { (1, stride) } else { (stride, stride) };
        if h % sh != 0 || w % sw != 0 {
            return Err(Error::shape(
                "conv",
                input,
                format!("stride {stride} does not divide the spatial extent"),
            ));
        }
        Ok(Self {
            batch,
            batched,
            spatial_rank,
            c_in,
            c_out: kernel[0],
            h,
            w,
            kh,
            kw,
            sh,
            sw,
            padding,
        })
    }

    pub fn out_h(&self) -> usize {
        self.h / self.sh
    }

    pub fn out_w(&self) -> usize {
        self.w / self.sw
    }

    fn pad_h(&self) -> usize {
        (self.kh - 1) / 2
    }

    fn pad_w(&self) -> usize {
        (self.kw - 1) / 2
    }

    fn padded_h(&self) -> usize {
        self.h + 2 * self.pad_h()
    }

    fn padded_w(&self) -> usize {
        self.w + 2 * self.pad_w()
    }

    pub fn output_shape(&self) -> Vec<usize> {
        let mut shape = Vec::with_capacity(4);
        if self.batched {
            shape.push(self.batch);
        }
        shape.push(self.c_out);
        if self.spatial_rank == 2 {
            shape.push(self.out_h());
        }
        shape.push(self.out_w());
        shape
    }

    /// Source row/column of a padded coordinate, `None` for zero padding.
    fn source(&self, padded: usize, pad: usize, extent: usize) -> Option<usize> {
        let i = padded as isize - pad as isize;
        match self.padding {
            Padding::Circular => Some(i.rem_euclid(extent as isize) as usize),
            Padding::Zero => (0..extent as isize).contains(&i).then_some(i as usize),
        }
    }

    fn pad_input(&self, x: &[f64]) -> Vec<f64> {
        let (hp, wp) = (self.padded_h(), self.padded_w());
        let planes = self.batch * self.c_in;
        let mut out = vec![0.0; planes * hp * wp];
        for p in 0..planes {
            let src = &x[p * self.h * self.w..(p + 1) * self.h * self.w];
            let dst = &mut out[p * hp * wp..(p + 1) * hp * wp];
            for py in 0..hp {
                let Some(iy) = self.source(py, self.pad_h(), self.h) else { continue };
                for px in 0..wp {
                    if let Some(ix) = self.source(px, self.pad_w(), self.w) {
                        dst[py * wp + px] = src[iy * self.w + ix];
                    }
                }
            }
        }
        out
    }

    fn fold_padded(&self, padded: &[f64]) -> Vec<f64> {
        let (hp, wp) = (self.padded_h(), self.padded_w());
        let planes = self.batch * self.c_in;
        let mut out = vec![0.0; planes * self.h * self.w];
        for p in 0..planes {
            let src = &padded[p * hp * wp..(p + 1) * hp * wp];
            let dst = &mut out[p * self.h * self.w..(p + 1) * self.h * self.w];
            for py in 0..hp {
                let Some(iy) = self.source(py, self.pad_h(), self.h) else { continue };
                for px in 0..wp {
                    if let Some(ix) = self.source(px, self.pad_w(), self.w) {
                        dst[iy * self.w + ix] += src[py * wp + px];
                    }
                }
            }
        }
        out
    }
}

#[inline]
fn accumulate_row(out: &mut [f64], row: &[f64], weight: f64, stride: usize) {
    if stride == 1 {
        for (o, &r) in out.iter_mut().zip(row) {
            *o += weight * r;
        }
    } else {
        for (o, &r) in out.iter_mut().zip(row.iter().step_by(stride)) {
            *o += weight * r;
        }
    }
}

#[inline]
fn dot_row(g: &[f64], row: &[f64], stride: usize) -> f64 {
    if stride == 1 {
        g.iter().zip(row).map(|(a, b)| a * b).sum()
    } else {
        g.iter().zip(row.iter().step_by(stride)).map(|(a, b)| a * b).sum()
    }
}

pub fn conv_forward(x: &[f64], kernel: &[f64], geo: &ConvGeometry) -> Vec<f64> {
    let padded = geo.pad_input(x);
    let (hp, wp) = (geo.padded_h(), geo.padded_w());
    let (oh, ow) = (geo.out_h(), geo.out_w());
    let ksize = geo.kh * geo.kw;
    let mut out = vec![0.0; geo.batch * geo.c_out * oh * ow];
    out.par_chunks_mut(oh * ow).enumerate().for_each(|(plane, dst)| {
        let (b, o) = (plane / geo.c_out, plane % geo.c_out);
        for c in 0..geo.c_in {
            let src = &padded[(b * geo.c_in + c) * hp * wp..(b * geo.c_in + c + 1) * hp * wp];
            let wk = &kernel[(o * geo.c_in + c) * ksize..(o * geo.c_in + c + 1) * ksize];
            for ty in 0..geo.kh {
                for tx in 0..geo.kw {
                    let weight = wk[ty * geo.kw + tx];
                    if weight == 0.0 {
                        continue;
                    }
                    for y in 0..oh {
                        let row_start = (y * geo.sh + ty) * wp + tx;
                        accumulate_row(&mut dst[y * ow..(y + 1) * ow], &src[row_start..], weight, geo.sw);
                    }
                }
            }
        }
    });
    out
}

/// Returns `(grad_input, grad_kernel)` for upstream gradient `grad_out`.
pub fn conv_backward(x: &[f64], kernel: &[f64], grad_out: &[f64], geo: &ConvGeometry) -> (Vec<f64>, Vec<f64>) {
    let padded = geo.pad_input(x);
    let (hp, wp) = (geo.padded_h(), geo.padded_w());
    let (oh, ow) = (geo.out_h(), geo.out_w());
    let ksize = geo.kh * geo.kw;

    let mut grad_kernel = vec![0.0; geo.c_out * geo.c_in * ksize];
    grad_kernel
        .par_chunks_mut(geo.c_in * ksize)
        .enumerate()
        .for_each(|(o, gk)| {
            for b in 0..geo.batch {
                let g = &grad_out[(b * geo.c_out + o) * oh * ow..(b * geo.c_out + o + 1) * oh * ow];
                for c in 0..geo.c_in {
                    let src = &padded[(b * geo.c_in + c) * hp * wp..(b * geo.c_in + c + 1) * hp * wp];
                    for ty in 0..geo.kh {
                        for tx in 0..geo.kw {
                            let mut acc = 0.0;
                            for y in 0..oh {
                                let row_start = (y * geo.sh + ty) * wp + tx;
                                acc += dot_row(&g[y * ow..(y + 1) * ow], &src[row_start..], geo.sw);
                            }
                            gk[c * ksize + ty * geo.kw + tx] += acc;
                        }
                    }
                }
            }
        });

    let mut grad_padded = vec![0.0; geo.batch * geo.c_in * hp * wp];
    grad_padded
        .par_chunks_mut(hp * wp)
        .enumerate()
        .for_each(|(plane, dst)| {
            let (b, c) = (plane / geo.c_in, plane % geo.c_in);
            for o in 0..geo.c_out {
                let g = &grad_out[(b * geo.c_out + o) * oh * ow..(b * geo.c_out + o + 1) * oh * ow];
                let wk = &kernel[(o * geo.c_in + c) * ksize..(o * geo.c_in + c + 1) * ksize];
                for ty in 0..geo.kh {
                    for tx in 0..geo.kw {
                        let weight = wk[ty * geo.kw + tx];
                        if weight == 0.0 {
                            continue;
                        }
                        for y in 0..oh {
                            let row_start = (y * geo.sh + ty) * wp + tx;
                            let grow = &g[y * ow..(y + 1) * ow];
                            if geo.sw == 1 {
                                for (d, &gv) in dst[row_start..row_start + ow].iter_mut().zip(grow) {
                                    *d += weight * gv;
                                }
                            } else {
                                for (x, &gv) in grow.iter().enumerate() {
                                    dst[row_start + x * geo.sw] += weight * gv;
                                }
                            }
                        }
                    }
                }
            }
        });

    (geo.fold_padded(&grad_padded), grad_kernel)
}
