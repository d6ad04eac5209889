//! Training a small residual 1-D conv net on aligned and misaligned signal
//! pairs under pixel, spatial-distribution and frequency-distribution losses.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::losses;
use crate::numerics::{adam_step, Adam, AdamState, Padding, RealTensor, Tape, Var};
use crate::rng;
use crate::transport::{wd1d, SampleSet};

/// Training objective for the toy model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossKind {
    Mse,
    /// 1-D Wasserstein distance between the value distributions.
    Spa,
    /// 1-D Wasserstein distances between amplitude and phase distributions.
    Freq,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Mse, LossKind::Spa, LossKind::Freq];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::Spa => "spa",
            LossKind::Freq => "freq",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "spa" => Ok(LossKind::Spa),
            "freq" => Ok(LossKind::Freq),
            other => Err(Error::InvalidArgument(format!("unknown loss kind {other:?} (mse, spa, freq)"))),
        }
    }
}

/// Input/target pairs, each `1×L`. Targets are circularly shifted by
/// `shifts[i]` relative to their aligned position.
#[derive(Clone, Debug, PartialEq)]
pub struct Toy1dDataset {
    pub pairs: Vec<(RealTensor, RealTensor)>,
    pub shifts: Vec<isize>,
    pub misalign_max: usize,
    pub seed: u64,
}

impl Toy1dDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn signal_len(&self) -> usize {
        self.pairs[0].0.numel()
    }
}

const TARGET_WIDTH: f64 = 0.5;
const TARGET_GAIN: f64 = 1.5;

struct Bump {
    centre: f64,
    width: f64,
    height: f64,
}

fn render(bumps: &[Bump], len: usize, width_scale: f64, gain: f64) -> RealTensor {
    let l = len as f64;
    let data = (0..len)
        .map(|n| {
            bumps
                .iter()
                .map(|b| {
                    let d = (n as f64 - b.centre).rem_euclid(l);
                    let d = d.min(l - d);
                    let s = b.width * width_scale;
                    gain * b.height * (-0.5 * d * d / (s * s)).exp()
                })
                .sum()
        })
        .collect();
    RealTensor::new(vec![1, len], data).expect("signal shape")
}

/// `n` aligned `(input, target)` pairs drawn from `stream`.
fn clean_pairs(n: usize, len: usize, stream: u64) -> Vec<(RealTensor, RealTensor)> {
    let mut r = rng::seeded(stream);
    let l = len as f64;
    (0..n)
        .map(|_| {
            let count = r.random_range(1..=3);
            let bumps: Vec<Bump> = (0..count)
                .map(|_| Bump {
                    centre: r.random_range(0.0..l),
                    width: r.random_range(l / 48.0..l / 24.0),
                    height: r.random_range(0.4..1.0),
                })
                .collect();
            (render(&bumps, len, 1.0, 1.0), render(&bumps, len, TARGET_WIDTH, TARGET_GAIN))
        })
        .collect()
}

fn check_len(len: usize) -> Result<()> {
    if len < 32 || !len.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("signal length must be a power of two ≥ 32, got {len}")));
    }
    Ok(())
}

/// Training pairs whose targets are circularly shifted by amounts drawn
/// uniformly from `[−misalign_max, misalign_max]`. The base signals and the
/// shifts come from separate streams, so datasets that differ only in
/// `misalign_max` share their signals.
pub fn gen_toy1d(n_pairs: usize, len: usize, misalign_max: usize, seed: u64) -> Result<Toy1dDataset> {
    check_len(len)?;
    if n_pairs == 0 {
        return Err(Error::InvalidArgument("need at least one pair".into()));
    }
    if misalign_max >= len / 2 {
        return Err(Error::InvalidArgument(format!("misalignment {misalign_max} too large for length {len}")));
    }
    let clean = clean_pairs(n_pairs, len, rng::derive_seed(seed, &[0]));
    let mut shift_rng = rng::seeded(rng::derive_seed(seed, &[1]));
    let m = misalign_max as i64;
    let shifts: Vec<isize> = (0..n_pairs).map(|_| shift_rng.random_range(-m..=m) as isize).collect();
    let pairs = clean
        .into_iter()
        .zip(&shifts)
        .map(|((x, y), &s)| {
            let y = if s == 0 { y } else { y.roll(1, s).expect("signal axis") };
            (x, y)
        })
        .collect();
    Ok(Toy1dDataset {
        pairs,
        shifts,
        misalign_max,
        seed,
    })
}

/// Aligned held-out pairs for `ds`, drawn from a stream disjoint from the
/// training signals.
pub fn test_pairs(ds: &Toy1dDataset, n: usize) -> Vec<(RealTensor, RealTensor)> {
    clean_pairs(n, ds.signal_len(), rng::derive_seed(ds.seed, &[2]))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Toy1dOptions {
    pub epochs: usize,
    pub lr: f64,
    pub hidden: usize,
    pub kernel: usize,
    pub test_pairs: usize,
}

impl Default for Toy1dOptions {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 5e-3,
            hidden: 16,
            kernel: 5,
            test_pairs: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub loss_kind: LossKind,
    pub aligned: bool,
    /// Training loss before each epoch's update.
    pub epoch_losses: Vec<f64>,
    /// Test MSE against aligned ground truth after training.
    pub final_test_mse: f64,
    pub untrained_test_mse: f64,
    /// Mean 1-D Wasserstein distance between predicted and true value
    /// distributions on the test set.
    pub final_test_wd: f64,
    pub untrained_test_wd: f64,
    pub seconds: f64,
    /// Test-set predictions after training, `1×L` each.
    pub predictions: Vec<RealTensor>,
}

/// `M(x) = f(x) + x` with `f` three circular conv1d layers.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyModel {
    /// Kernels and biases, alternating: `k₁, b₁, k₂, b₂, k₃, b₃`.
    pub params: Vec<RealTensor>,
}

impl ToyModel {
    /// He-normal kernels and zero biases, with the last layer zeroed so the
    /// untrained model is the identity map.
    pub fn init(hidden: usize, kernel: usize, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let dims = [(hidden, 1), (hidden, hidden), (1, hidden)];
        let mut params = Vec::with_capacity(6);
        for (layer, &(c_out, c_in)) in dims.iter().enumerate() {
            let shape = [c_out, c_in, kernel];
            let kernel_t = if layer == dims.len() - 1 {
                RealTensor::zeros(&shape)
            } else {
                let std = (2.0 / (c_in * kernel) as f64).sqrt();
                let data = (0..c_out * c_in * kernel)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut r);
                        std * z
                    })
                    .collect();
                RealTensor::new(shape.to_vec(), data).expect("kernel shape")
            };
            params.push(kernel_t);
            params.push(RealTensor::zeros(&[c_out]));
        }
        Self { params }
    }

    /// Applies the model to a `B×1×L` batch.
    pub fn forward(tape: &mut Tape, params: &[Var], x: Var) -> Result<Var> {
        let mut h = x;
        for (layer, pair) in params.chunks_exact(2).enumerate() {
            let conv = tape.conv(h, pair[0], 1, Padding::Circular)?;
            h = tape.bias_add(conv, pair[1], true)?;
            if layer + 1 < params.len() / 2 {
                h = tape.relu(h);
            }
        }
        tape.add(h, x)
    }

    pub fn predict(&self, inputs: &[RealTensor]) -> Result<Vec<RealTensor>> {
        let mut tape = Tape::new();
        let params: Vec<Var> = self.params.iter().map(|p| tape.constant(p.clone())).collect();
        let x = tape.constant(batch(inputs)?);
        let y = Self::forward(&mut tape, &params, x)?;
        unbatch(tape.value(y))
    }
}

fn batch(signals: &[RealTensor]) -> Result<RealTensor> {
    RealTensor::stack(signals)
}

fn unbatch(t: &RealTensor) -> Result<Vec<RealTensor>> {
    (0..t.shape()[0]).map(|i| t.select(i)).collect()
}

fn objective(tape: &mut Tape, kind: LossKind, pred: Var, target: Var, n: usize) -> Result<Var> {
    if kind == LossKind::Mse {
        return losses::mse(tape, pred, target);
    }
    let inv = 1.0 / n as f64;
    let mut terms = Vec::with_capacity(n);
    for i in 0..n {
        let p = tape.select(pred, i)?;
        let t = tape.select(target, i)?;
        let l = match kind {
            LossKind::Spa => losses::spatial_wd_1d(tape, p, t)?,
            _ => losses::freq_wd_1d(tape, p, t)?,
        };
        terms.push((l, inv));
    }
    tape.weighted_sum(&terms)
}

fn test_metrics(preds: &[RealTensor], truth: &[(RealTensor, RealTensor)]) -> Result<(f64, f64)> {
    let n = preds.len() as f64;
    let mut mse = 0.0;
    let mut wd = 0.0;
    for (p, (_, y)) in preds.iter().zip(truth) {
        mse += losses::mse_value(p, y)?;
        wd += wd1d(&SampleSet::from_values(p.data())?, &SampleSet::from_values(y.data())?)?;
    }
    Ok((mse / n, wd / n))
}

/// Full-batch Adam training of a fresh [`ToyModel`] initialized from `seed`.
pub fn train_toy1d(ds: &Toy1dDataset, kind: LossKind, opts: &Toy1dOptions, seed: u64) -> Result<TrainReport> {
    let started = Instant::now();
    if ds.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let mut model = ToyModel::init(opts.hidden, opts.kernel, rng::derive_seed(seed, &[3]));
    let inputs: Vec<RealTensor> = ds.pairs.iter().map(|(x, _)| x.clone()).collect();
    let targets: Vec<RealTensor> = ds.pairs.iter().map(|(_, y)| y.clone()).collect();
    let x_batch = batch(&inputs)?;
    let y_batch = batch(&targets)?;
    let test = test_pairs(ds, opts.test_pairs);
    let test_inputs: Vec<RealTensor> = test.iter().map(|(x, _)| x.clone()).collect();
    let (untrained_test_mse, untrained_test_wd) = test_metrics(&model.predict(&test_inputs)?, &test)?;

    let mut state = AdamState::new(Adam::with_lr(opts.lr), &model.params);
    let mut epoch_losses = Vec::with_capacity(opts.epochs);
    for epoch in 0..opts.epochs {
        let mut tape = Tape::new();
        let params: Vec<Var> = model.params.iter().map(|p| tape.param(p.clone())).collect();
        let x = tape.constant(x_batch.clone());
        let y = tape.constant(y_batch.clone());
        let pred = ToyModel::forward(&mut tape, &params, x)?;
        let loss = objective(&mut tape, kind, pred, y, ds.len())?;
        let value = tape.value(loss).item().expect("scalar loss");
        if !value.is_finite() {
            return Err(Error::NonFinite(format!("{kind} training loss diverged at epoch {epoch}: {value}")));
        }
        epoch_losses.push(value);
        let grads = tape.backward(loss)?;
        let g: Vec<RealTensor> = params.iter().map(|&p| grads.wrt(&tape, p)).collect();
        adam_step(&mut model.params, &g, &mut state)?;
    }

    let predictions = model.predict(&test_inputs)?;
    let (final_test_mse, final_test_wd) = test_metrics(&predictions, &test)?;
    if !final_test_mse.is_finite() {
        return Err(Error::NonFinite(format!("{kind} model produced non-finite test predictions")));
    }
    Ok(TrainReport {
        loss_kind: kind,
        aligned: ds.misalign_max == 0,
        epoch_losses,
        final_test_mse,
        untrained_test_mse,
        final_test_wd,
        untrained_test_wd,
        seconds: started.elapsed().as_secs_f64(),
        predictions,
    })
}
