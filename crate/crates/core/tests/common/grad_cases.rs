//! Scalar test functions covering every differentiable operation, each with
//! a generator of tie-free random evaluation points.

use fdl::features::{ExtractorSpec, PyramidSpec};
use fdl::losses::{self, FdlConfig};
use fdl::numerics::{Padding, RealTensor, Tape, Var};
use fdl::spectral::{diff, DftAxes};
use fdl::transport::{make_projections, sliced_wd_var, wd1d_var};
use rand::Rng;

use super::{project_to_scalar, rng, uniform};

pub struct Case {
    pub name: &'static str,
    pub point: Box<dyn Fn(u64) -> RealTensor>,
    pub build: Box<dyn Fn(&mut Tape, Var) -> Var>,
}

fn case(
    name: &'static str,
    point: impl Fn(u64) -> RealTensor + 'static,
    build: impl Fn(&mut Tape, Var) -> Var + 'static,
) -> Case {
    Case {
        name,
        point: Box::new(point),
        build: Box::new(build),
    }
}

fn points(shape: &'static [usize]) -> impl Fn(u64) -> RealTensor {
    move |seed| uniform(&mut rng(seed), shape, -1.0, 1.0)
}

/// Values bounded away from zero so relu kinks are never straddled.
fn off_zero(shape: &'static [usize]) -> impl Fn(u64) -> RealTensor {
    move |seed| {
        uniform(&mut rng(seed), shape, -1.0, 1.0).map(|v| if v < 0.0 { v - 0.05 } else { v + 0.05 })
    }
}

fn fixed(shape: &[usize], seed: u64) -> RealTensor {
    uniform(&mut rng(seed ^ 0xABCD), shape, -1.0, 1.0)
}

fn image_cfg(extractor: ExtractorSpec, lambda: f64) -> FdlConfig {
    FdlConfig {
        lambda,
        projections: 8,
        master_seed: 17,
        extractor,
        layer_weights: None,
    }
}

fn small_pyramid() -> ExtractorSpec {
    ExtractorSpec::Pyramid(PyramidSpec {
        channels: vec![4, 4, 4],
        ..PyramidSpec::default()
    })
}

/// Loss of `x` against a fixed random image of the same shape.
fn against_fixed(
    shape: &'static [usize],
    f: impl Fn(&mut Tape, Var, Var) -> Var + 'static,
) -> impl Fn(&mut Tape, Var) -> Var {
    move |tape, x| {
        let v = tape.constant(fixed(shape, 99).map(|t| t.abs()));
        f(tape, x, v)
    }
}

const IMG: &[usize] = &[2, 8, 8];

pub fn all() -> Vec<Case> {
    vec![
        case("add", points(&[3, 4]), |t, x| {
            let c = t.constant(fixed(&[3, 4], 1));
            let y = t.add(x, c).unwrap();
            project_to_scalar(t, y, 10)
        }),
        case("sub", points(&[5]), |t, x| {
            let c = t.constant(fixed(&[5], 2));
            let y = t.sub(c, x).unwrap();
            project_to_scalar(t, y, 11)
        }),
        case("mul", points(&[2, 3]), |t, x| {
            let c = t.constant(fixed(&[2, 3], 3));
            let y = t.mul(x, c).unwrap();
            let sq = t.mul(y, x).unwrap();
            project_to_scalar(t, sq, 12)
        }),
        case("scale", points(&[4]), |t, x| {
            let y = t.scale(x, -2.5);
            project_to_scalar(t, y, 13)
        }),
        case("relu", off_zero(&[10]), |t, x| {
            let y = t.relu(x);
            project_to_scalar(t, y, 14)
        }),
        case("mean_sum_weighted", points(&[6]), |t, x| {
            let m = t.mean(x);
            let sq = t.mul(x, x).unwrap();
            let s = t.sum(sq);
            t.weighted_sum(&[(m, 0.5), (s, -1.5)]).unwrap()
        }),
        case("reshape_transpose_select", points(&[2, 3, 2]), |t, x| {
            let s = t.select(x, 1).unwrap();
            let r = t.reshape(s, &[2, 3]).unwrap();
            let tr = t.transpose(r).unwrap();
            project_to_scalar(t, tr, 15)
        }),
        case("bias_add", points(&[3]), |t, b| {
            let x = t.constant(fixed(&[2, 3, 4], 4));
            let y = t.bias_add(x, b, true).unwrap();
            let sq = t.mul(y, y).unwrap();
            project_to_scalar(t, sq, 16)
        }),
        case("conv2d_signal", points(&[2, 6, 6]), |t, x| {
            let k = t.constant(fixed(&[3, 2, 3, 3], 5));
            let y = t.conv(x, k, 1, Padding::Circular).unwrap();
            project_to_scalar(t, y, 17)
        }),
        case("conv2d_kernel_stride2_zero", points(&[3, 2, 3, 3]), |t, k| {
            let x = t.constant(fixed(&[2, 6, 6], 6));
            let y = t.conv(x, k, 2, Padding::Zero).unwrap();
            project_to_scalar(t, y, 18)
        }),
        case("conv1d_batched", points(&[2, 1, 8]), |t, x| {
            let k = t.constant(fixed(&[4, 1, 5], 7));
            let y = t.conv(x, k, 1, Padding::Circular).unwrap();
            let sq = t.mul(y, y).unwrap();
            project_to_scalar(t, sq, 19)
        }),
        case("dft", points(&[2, 4, 4]), |t, x| {
            let s = diff::dft(t, x, DftAxes::Last2).unwrap();
            project_to_scalar(t, s, 20)
        }),
        case("to_polar", points(&[8]), |t, x| {
            let s = diff::dft(t, x, DftAxes::Last1).unwrap();
            let p = diff::to_polar(t, s).unwrap();
            project_to_scalar(t, p, 21)
        }),
        case("from_polar", points(&[2, 6]), |t, p| {
            let s = diff::from_polar(t, p).unwrap();
            project_to_scalar(t, s, 22)
        }),
        case("idft_chain", points(&[1, 4, 8]), |t, x| {
            let s = diff::dft(t, x, DftAxes::Last2).unwrap();
            let p = diff::to_polar(t, s).unwrap();
            let back = diff::from_polar(t, p).unwrap();
            let y = diff::idft(t, back, DftAxes::Last2).unwrap();
            let sq = t.mul(y, y).unwrap();
            project_to_scalar(t, sq, 23)
        }),
        case("wd1d", points(&[7]), |t, a| {
            let b = t.constant(fixed(&[7], 8));
            wd1d_var(t, a, b).unwrap()
        }),
        case("sliced_wd", points(&[10, 3]), |t, a| {
            let b = t.constant(fixed(&[10, 3], 9));
            let bank = make_projections(8, 3, 5).unwrap();
            sliced_wd_var(t, a, b, &bank).unwrap()
        }),
        case("mse", points(IMG), against_fixed(IMG, |t, u, v| losses::mse(t, u, v).unwrap())),
        case("freq_wd_1d", points(&[1, 16]), |t, u| {
            let v = t.constant(fixed(&[1, 16], 10));
            losses::freq_wd_1d(t, u, v).unwrap()
        }),
        case(
            "fdl_identity",
            points(IMG),
            against_fixed(IMG, |t, u, v| losses::fdl(t, u, v, &image_cfg(ExtractorSpec::Identity, 0.7), 3).unwrap()),
        ),
        case(
            "fdl_pyramid",
            points(IMG),
            against_fixed(IMG, |t, u, v| losses::fdl(t, u, v, &image_cfg(small_pyramid(), 1.0), 4).unwrap()),
        ),
        case(
            "spatial_swd",
            points(IMG),
            against_fixed(IMG, |t, u, v| {
                losses::spatial_swd(t, u, v, &image_cfg(small_pyramid(), 1.0), 5).unwrap()
            }),
        ),
        case(
            "style_loss",
            points(IMG),
            against_fixed(IMG, |t, u, v| {
                losses::style_loss(t, u, v, &image_cfg(small_pyramid(), 1.0), 6).unwrap()
            }),
        ),
        case(
            "content_loss",
            points(IMG),
            against_fixed(IMG, |t, u, v| {
                losses::content_loss(t, u, v, &image_cfg(small_pyramid(), 1.0), 7).unwrap()
            }),
        ),
    ]
}

/// Random seeds for evaluation points; a fixed stream per case.
pub fn point_seeds(case_index: usize, count: usize) -> Vec<u64> {
    let mut r = rng(1000 + case_index as u64);
    (0..count).map(|_| r.random()).collect()
}
