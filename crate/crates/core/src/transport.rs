//! One-dimensional Wasserstein-1 distance between equal-size empirical
//! distributions, and its sliced approximation in higher dimensions.
//!
//! For two sets of `n` equally weighted points on the line, the optimal
//! matching pairs the `i`-th smallest of one set with the `i`-th smallest of the
//! other, so `W₁ = (1/n)·Σᵢ |a₍ᵢ₎ − b₍ᵢ₎|`. The sliced distance averages this
//! over projections onto a bank of unit directions.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{Backward, RealTensor, Tape, Var};
use crate::rng;

/// `n` points in `d` dimensions, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    n: usize,
    d: usize,
    points: Vec<f64>,
}

impl SampleSet {
    pub fn new(n: usize, d: usize, points: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidArgument(format!("sample set needs n, d ≥ 1 (got {n}×{d})")));
        }
        if points.len() != n * d {
            return Err(Error::InvalidArgument(format!(
                "sample set {n}×{d} needs {} values, got {}",
                n * d,
                points.len()
            )));
        }
        Ok(Self { n, d, points })
    }

    /// One-dimensional samples.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    /// Rank-1 tensors become 1-D samples, rank-2 tensors are read as `n×d`.
    pub fn from_tensor(t: &RealTensor) -> Result<Self> {
        match *t.shape() {
            [n] => Self::new(n, 1, t.data().to_vec()),
            [n, d] => Self::new(n, d, t.data().to_vec()),
            _ => Err(Error::shape("sample set", t.shape(), "expected n or n×d")),
        }
    }

    pub fn to_tensor(&self) -> RealTensor {
        RealTensor::new(vec![self.n, self.d], self.points.clone()).expect("consistent sample set")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    /// Reorders points: output point `i` is input point `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n {
            return Err(Error::InvalidArgument("permutation length differs from n".into()));
        }
        let mut points = Vec::with_capacity(self.points.len());
        for &i in order {
            points.extend_from_slice(self.point(i));
        }
        Self::new(self.n, self.d, points)
    }
}

/// Unit directions used to slice `d`-dimensional samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionBank {
    k: usize,
    d: usize,
    dirs: Vec<f64>,
    seed: Option<u64>,
}

impl ProjectionBank {
    /// Bank from explicit rows; each row must have unit L2 norm to 1e-12.
    pub fn from_rows(k: usize, d: usize, dirs: Vec<f64>) -> Result<Self> {
        if k == 0 || d == 0 || dirs.len() != k * d {
            return Err(Error::InvalidArgument(format!(
                "projection bank {k}×{d} with {} values",
                dirs.len()
            )));
        }
        for row in dirs.chunks(d) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("direction has norm {norm}")));
            }
        }
        Ok(Self { k, d, dirs, seed: None })
    }

    /// The single direction `[+1]`; slicing with it is the plain 1-D distance.
    pub fn unit_1d() -> Self {
        Self {
            k: 1,
            d: 1,
            dirs: vec![1.0],
            seed: None,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn dirs(&self) -> &[f64] {
        &self.dirs
    }

    pub fn direction(&self, j: usize) -> &[f64] {
        &self.dirs[j * self.d..(j + 1) * self.d]
    }
}

/// `k` directions drawn i.i.d. standard normal and L2-normalized.
pub fn make_projections(k: usize, d: usize, seed: u64) -> Result<ProjectionBank> {
    if k == 0 || d == 0 {
        return Err(Error::InvalidArgument(format!("projection bank needs k, d ≥ 1 (got {k}, {d})")));
    }
    let mut rng = rng::seeded(seed);
    let mut dirs = Vec::with_capacity(k * d);
    let mut row = vec![0.0f64; d];
    for _ in 0..k {
        loop {
            row.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-300 {
                dirs.extend(row.iter().map(|v| v / norm));
                break;
            }
        }
    }
    Ok(ProjectionBank {
        k,
        d,
        dirs,
        seed: Some(seed),
    })
}

/// Projections per parallel work unit. Fixed so that summation order, and
/// therefore every output bit, is independent of the thread count.
const BLOCK: usize = 16;

struct SlicedEval {
    value: f64,
    grad_a: Option<Vec<f64>>,
    grad_b: Option<Vec<f64>>,
}

fn sorted_with_index(values: &[f64]) -> Vec<(f64, u32)> {
    let mut v: Vec<(f64, u32)> = values.iter().enumerate().map(|(i, &x)| (x, i as u32)).collect();
    // Stable, so ties keep index order. Keys follow `f64::total_cmp`.
    radsort::sort_by_key(&mut v, |p| p.0);
    v
}

fn project(points: &[f64], d: usize, dir: &[f64], out: &mut [f64]) {
    if d == 1 {
        let s = dir[0];
        out.iter_mut().zip(points).for_each(|(o, &p)| *o = p * s);
    } else {
        for (o, p) in out.iter_mut().zip(points.chunks_exact(d)) {
            *o = p.iter().zip(dir).map(|(x, y)| x * y).sum();
        }
    }
}

/// Per-direction values and optional gradients for one block of directions.
type Block = (Vec<f64>, Option<Vec<f64>>, Option<Vec<f64>>);

fn sliced_kernel(a: &[f64], b: &[f64], n: usize, bank: &ProjectionBank, need_a: bool, need_b: bool) -> SlicedEval {
    let d = bank.d;
    let inv_n = 1.0 / n as f64;
    let blocks: Vec<Block> = bank
        .dirs
        .par_chunks(BLOCK * d)
        .map(|dirs| {
            let mut values = Vec::with_capacity(dirs.len() / d);
            let mut ga = need_a.then(|| vec![0.0; n * d]);
            let mut gb = need_b.then(|| vec![0.0; n * d]);
            let mut pa = vec![0.0; n];
            let mut pb = vec![0.0; n];
            let mut coeff_a = vec![0.0; n];
            let mut coeff_b = vec![0.0; n];
            for dir in dirs.chunks_exact(d) {
                project(a, d, dir, &mut pa);
                project(b, d, dir, &mut pb);
                let sa = sorted_with_index(&pa);
                let sb = sorted_with_index(&pb);
                let mut acc = 0.0;
                for (&(va, ia), &(vb, ib)) in sa.iter().zip(&sb) {
                    let diff = va - vb;
                    acc += diff.abs();
                    let s = if diff > 0.0 {
                        inv_n
                    } else if diff < 0.0 {
                        -inv_n
                    } else {
                        0.0
                    };
                    coeff_a[ia as usize] = s;
                    coeff_b[ib as usize] = -s;
                }
                values.push(acc * inv_n);
                for (g, coeff) in [(&mut ga, &coeff_a), (&mut gb, &coeff_b)] {
                    if let Some(g) = g {
                        for (gi, &c) in g.chunks_exact_mut(d).zip(coeff.iter()) {
                            gi.iter_mut().zip(dir).for_each(|(x, &u)| *x += c * u);
                        }
                    }
                }
            }
            (values, ga, gb)
        })
        .collect();

    let inv_k = 1.0 / bank.k as f64;
    let mut total = 0.0;
    let mut grad_a = need_a.then(|| vec![0.0; n * d]);
    let mut grad_b = need_b.then(|| vec![0.0; n * d]);
    for (values, ga, gb) in blocks {
        total += values.iter().sum::<f64>();
        for (acc, part) in [(&mut grad_a, ga), (&mut grad_b, gb)] {
            if let (Some(acc), Some(part)) = (acc, part) {
                acc.iter_mut().zip(part).for_each(|(x, y)| *x += y);
            }
        }
    }
    for g in grad_a.iter_mut().chain(grad_b.iter_mut()) {
        g.iter_mut().for_each(|x| *x *= inv_k);
    }
    SlicedEval {
        value: total * inv_k,
        grad_a,
        grad_b,
    }
}

fn check_pair(a: &SampleSet, b: &SampleSet, bank_d: usize) -> Result<()> {
    if a.d != b.d || a.d != bank_d {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: {} vs {} (bank {bank_d})",
            a.d, b.d
        )));
    }
    if a.n != b.n {
        return Err(Error::InvalidArgument(format!(
            "sample counts differ ({} vs {}); only equal-mass transport is supported",
            a.n, b.n
        )));
    }
    Ok(())
}

/// Closed-form 1-D Wasserstein-1 distance.
pub fn wd1d(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    if a.d != 1 || b.d != 1 {
        return Err(Error::InvalidArgument("wd1d needs one-dimensional samples".into()));
    }
    sliced_wd(a, b, &ProjectionBank::unit_1d())
}

/// Largest `n` accepted by [`wd1d_oracle`].
pub const ORACLE_MAX_N: usize = 8;

/// Minimum over all `n!` matchings of the mean absolute difference.
pub fn wd1d_oracle(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    check_pair(a, b, 1)?;
    if a.n > ORACLE_MAX_N {
        return Err(Error::InvalidArgument(format!(
            "oracle enumerates n! matchings; n = {} exceeds {ORACLE_MAX_N}",
            a.n
        )));
    }
    let n = a.n;
    let mut perm: Vec<usize> = (0..n).collect();
    let cost = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| (a.points[i] - b.points[j]).abs()).sum::<f64>();
    let mut best = cost(&perm);
    // Heap's algorithm, iterative form.
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(best / n as f64)
}

/// Mean of 1-D distances between the projections of `a` and `b` onto each
/// bank direction.
pub fn sliced_wd(a: &SampleSet, b: &SampleSet, bank: &ProjectionBank) -> Result<f64> {
    check_pair(a, b, bank.d)?;
    Ok(sliced_kernel(&a.points, &b.points, a.n, bank, false, false).value)
}

struct SlicedRule {
    grad_a: Option<Vec<f64>>,
    grad_b: Option<Vec<f64>>,
}

impl Backward for SlicedRule {
    fn name(&self) -> &'static str {
        "sliced_wd"
    }

    fn backward(&self, inputs: &[&RealTensor], _output: &RealTensor, grad: &RealTensor) -> Vec<Option<RealTensor>> {
        let g = grad.data()[0];
        [&self.grad_a, &self.grad_b]
            .into_iter()
            .zip(inputs)
            .map(|(local, input)| {
                local.as_ref().map(|l| {
                    RealTensor::new(input.shape().to_vec(), l.iter().map(|v| v * g).collect()).expect("input shape")
                })
            })
            .collect()
    }
}

fn sliced_on_tape(tape: &mut Tape, a: Var, b: Var, n: usize, bank: &ProjectionBank) -> Var {
    let need_a = tape.requires_grad(a);
    let need_b = tape.requires_grad(b);
    let eval = sliced_kernel(tape.value(a).data(), tape.value(b).data(), n, bank, need_a, need_b);
    tape.custom(
        &[a, b],
        RealTensor::scalar(eval.value),
        Box::new(SlicedRule {
            grad_a: eval.grad_a,
            grad_b: eval.grad_b,
        }),
    )
}

/// Differentiable sliced distance between `n×d` sample tensors. The sorting
/// permutations of the forward pass fix the gradient (ties follow index
/// order).
pub fn sliced_wd_var(tape: &mut Tape, a: Var, b: Var, bank: &ProjectionBank) -> Result<Var> {
    let (sa, sb) = (tape.shape(a), tape.shape(b));
    if sa != sb {
        return Err(Error::mismatch("sliced_wd", sa, sb));
    }
    let (n, d) = match *sa {
        [n, d] => (n, d),
        [n] => (n, 1),
        _ => return Err(Error::shape("sliced_wd", sa, "expected n×d samples")),
    };
    if d != bank.d {
        return Err(Error::InvalidArgument(format!("samples have d = {d}, bank has d = {}", bank.d)));
    }
    Ok(sliced_on_tape(tape, a, b, n, bank))
}

/// Differentiable 1-D distance treating every element of `a` and `b` as one
/// sample.
pub fn wd1d_var(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let (na, nb) = (tape.value(a).numel(), tape.value(b).numel());
    if na != nb {
        return Err(Error::InvalidArgument(format!(
            "sample counts differ ({na} vs {nb}); only equal-mass transport is supported"
        )));
    }
    Ok(sliced_on_tape(tape, a, b, na, &ProjectionBank::unit_1d()))
}
