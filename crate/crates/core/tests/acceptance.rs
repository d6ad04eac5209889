//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::grad_cases::{all, point_seeds};
use common::{fd_error, matching_oracle, rng, uniform, FD_REL_TOL};
use fdl::experiments::{
    gen_toy1d, shift_curve, style_transfer, synthetic_scene, train_toy1d, CurveLoss, LossKind, StyleOptions, Toy1dOptions,
};
use fdl::features::{ExtractorSpec, PyramidSpec};
use fdl::io::{read_pnm, write_pnm};
use fdl::losses::{self, FdlConfig};
use fdl::numerics::RealTensor;
use fdl::spectral::{self, naive_dft, DftAxes, FftPlan};
use fdl::transport::{make_projections, sliced_wd, wd1d, ProjectionBank, SampleSet};
use rand::Rng;

const WD_TOL: f64 = 1e-12;
const ROUND_TRIP_TOL: f64 = 1e-10;
const PARSEVAL_TOL: f64 = 1e-9;
const SHIFT_TOL: f64 = 1e-10;
const FFT_TOL: f64 = 1e-9;
const GRAD_POINTS: usize = 20;
const FDL_TO_MSE_RATIO: f64 = 1.0 / 3.0;
const AMPLITUDE_ONLY_TOL: f64 = 1e-10;
const MIX_TOL: f64 = 1e-10;
const LOSS_ZERO_TOL: f64 = 1e-12;
const STYLE_OBJECTIVE_RATIO: f64 = 0.5;
const CONTENT_DRIFT_TOL: f64 = 1e-6;

/// Phase weight for style transfer and super-resolution.
const STYLE_LAMBDA: f64 = 1.0;
/// Fewer slicing directions than the library default keep 300 steps at
/// 128×128 inside the time budget.
const STYLE_PROJECTIONS: usize = 64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(outcome: Outcome, elapsed: Duration, budget: Duration) -> Outcome {
    let fast = elapsed < budget;
    Outcome {
        pass: outcome.pass && fast,
        detail: format!("{}; {:.1}s (limit {}s)", outcome.detail, elapsed.as_secs_f64(), budget.as_secs()),
    }
}

fn wd(a: &[f64], b: &[f64]) -> f64 {
    wd1d(&SampleSet::from_values(a).unwrap(), &SampleSet::from_values(b).unwrap()).unwrap()
}

fn criterion_1() -> Outcome {
    let mut r = rng(1001);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = r.random_range(1..=6);
        let a: Vec<f64> = (0..n).map(|_| r.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| r.random_range(-10.0..10.0)).collect();
        worst = worst.max((wd(&a, &b) - matching_oracle(&a, &b)).abs());
    }
    check(worst <= WD_TOL, format!("max |wd1d − oracle| = {worst:.2e} over 500 instances"))
}

fn criterion_2() -> Outcome {
    let mut r = rng(1002);
    let unit = ProjectionBank::unit_1d();
    let mut exact = true;
    for _ in 0..200 {
        let n = r.random_range(1..=12);
        let a: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let sa = SampleSet::from_values(&a).unwrap();
        let sb = SampleSet::from_values(&b).unwrap();
        exact &= sliced_wd(&sa, &sb, &unit).unwrap() == wd(&a, &b);
    }

    // Sliced distances in three dimensions and wd1d on the first coordinate.
    let bank = make_projections(32, 3, 1002).unwrap();
    let mut worst = 0.0f64;
    let mut violations = 0;
    for _ in 0..200 {
        let n = 10;
        let raw: Vec<Vec<f64>> = (0..3).map(|_| uniform(&mut r, &[n * 3], -2.0, 2.0).into_data()).collect();
        let sets: Vec<SampleSet> = raw.iter().map(|p| SampleSet::new(n, 3, p.clone()).unwrap()).collect();
        let lines: Vec<Vec<f64>> = raw.iter().map(|p| p.iter().step_by(3).copied().collect()).collect();
        let order: Vec<usize> = (0..n).rev().collect();
        let reversed: Vec<f64> = lines[0].iter().rev().copied().collect();

        let sw = |i: usize, j: usize| sliced_wd(&sets[i], &sets[j], &bank).unwrap();
        let w = |i: usize, j: usize| wd(&lines[i], &lines[j]);
        for (ab, ba, ac, bc, aa) in [(sw(0, 1), sw(1, 0), sw(0, 2), sw(1, 2), sw(0, 0)), (w(0, 1), w(1, 0), w(0, 2), w(1, 2), w(0, 0))] {
            if !(ab >= 0.0) || aa != 0.0 || ac > ab + bc + WD_TOL {
                violations += 1;
            }
            worst = worst.max((ab - ba).abs());
        }
        let permuted = sliced_wd(&sets[0].permuted(&order).unwrap(), &sets[1], &bank).unwrap();
        worst = worst.max((sw(0, 1) - permuted).abs()).max((w(0, 1) - wd(&reversed, &lines[1])).abs());
    }
    check(
        exact && violations == 0 && worst <= WD_TOL,
        format!("unit bank exact: {exact}; axiom violations {violations}/400; max asymmetry/permutation gap {worst:.2e}"),
    )
}

fn dft_direct(re: &[f64], im: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = re.len();
    let mut out = (vec![0.0; n], vec![0.0; n]);
    for k in 0..n {
        for j in 0..n {
            let t = -2.0 * PI * ((k * j) % n) as f64 / n as f64;
            let (s, c) = t.sin_cos();
            out.0[k] += re[j] * c - im[j] * s;
            out.1[k] += re[j] * s + im[j] * c;
        }
    }
    out
}

fn criterion_3() -> Outcome {
    let mut r = rng(1003);
    let mut round_trip = 0.0f64;
    let mut parseval = 0.0f64;
    for _ in 0..50 {
        let x = uniform(&mut r, &[3, 16, 24], -1.0, 1.0);
        let s = spectral::dft(&x, DftAxes::Last2).unwrap();
        round_trip = round_trip.max(spectral::idft(&s).unwrap().max_abs_diff(&x));
        let e: f64 = x.data().iter().map(|v| v * v).sum();
        let es: f64 = s.re.iter().zip(&s.im).map(|(a, b)| a * a + b * b).sum::<f64>() / (16 * 24) as f64;
        parseval = parseval.max((e - es).abs() / e);
    }

    let mut shift = 0.0f64;
    for _ in 0..50 {
        let n = r.random_range(2..=64);
        let x = uniform(&mut r, &[n], -1.0, 1.0);
        let base = spectral::to_polar(&spectral::dft(&x, DftAxes::Last1).unwrap()).amplitude;
        for s in 0..n {
            let rolled = spectral::to_polar(&spectral::dft(&x.roll(0, s as isize).unwrap(), DftAxes::Last1).unwrap()).amplitude;
            shift = shift.max(base.iter().zip(&rolled).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
    }

    let mut fft = 0.0f64;
    for n in 4..=512 {
        let re = uniform(&mut r, &[n], -1.0, 1.0).into_data();
        let im = uniform(&mut r, &[n], -1.0, 1.0).into_data();
        let (mut fr, mut fi) = (re.clone(), im.clone());
        FftPlan::new(n).process(&mut fr, &mut fi, false);
        let (nr, ni) = naive_dft(&re, &im, false);
        let (or, oi) = dft_direct(&re, &im);
        for k in 0..n {
            fft = fft
                .max((fr[k] - nr[k]).abs())
                .max((fi[k] - ni[k]).abs())
                .max((fr[k] - or[k]).abs())
                .max((fi[k] - oi[k]).abs());
        }
    }
    check(
        round_trip <= ROUND_TRIP_TOL && parseval <= PARSEVAL_TOL && shift <= SHIFT_TOL && fft <= FFT_TOL,
        format!("round trip {round_trip:.1e}, Parseval {parseval:.1e}, shift {shift:.1e}, FFT vs naive {fft:.1e} (N = 4..512)"),
    )
}

fn criterion_4() -> Outcome {
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let cases = all();
    for (index, case) in cases.iter().enumerate() {
        for seed in point_seeds(index, GRAD_POINTS) {
            let err = fd_error(&case.build, &(case.point)(seed));
            worst = worst.max(err);
            if !(err < FD_REL_TOL) {
                failures.push(format!("{}@{seed}", case.name));
            }
        }
    }
    check(
        failures.is_empty(),
        format!(
            "{} ops × {GRAD_POINTS} points, worst relative error {worst:.1e} (tol {FD_REL_TOL:e}){}",
            cases.len(),
            if failures.is_empty() { String::new() } else { format!(", failing: {}", failures.join(" ")) }
        ),
    )
}

fn criterion_5() -> Outcome {
    let image = synthetic_scene(3, 128, 128, 1).unwrap();
    let cfg = FdlConfig {
        lambda: 1.0,
        ..FdlConfig::default()
    };
    let rows = shift_curve(&image, &[CurveLoss::Mse, CurveLoss::Fdl, CurveLoss::FdlAmplitude], 16, &cfg).unwrap();
    let mean = |kind: CurveLoss| {
        let v: Vec<f64> = rows.iter().filter(|r| r.kind == kind && r.shift >= 2).map(|r| r.normalized).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (m, f) = (mean(CurveLoss::Mse), mean(CurveLoss::Fdl));
    let amp = rows
        .iter()
        .filter(|r| r.kind == CurveLoss::FdlAmplitude)
        .map(|r| r.value.abs())
        .fold(0.0, f64::max);
    check(
        f <= FDL_TO_MSE_RATIO * m && amp <= AMPLITUDE_ONLY_TOL,
        format!("mean normalized response over shifts 2–16: fdl {f:.3}, mse {m:.3}; λ=0 row max {amp:.1e}"),
    )
}

fn criterion_6() -> Outcome {
    let opts = Toy1dOptions {
        epochs: 200,
        ..Toy1dOptions::default()
    };
    let (mut a, mut b, mut c) = (0, 0, 0);
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        let aligned = gen_toy1d(128, 128, 0, seed).unwrap();
        let misaligned = gen_toy1d(128, 128, 8, seed).unwrap();
        let run = |ds, kind| train_toy1d(ds, kind, &opts, seed).unwrap();
        let mse_al = run(&aligned, LossKind::Mse);
        let mse_mis = run(&misaligned, LossKind::Mse);
        let freq_al = run(&aligned, LossKind::Freq);
        let freq_mis = run(&misaligned, LossKind::Freq);
        let freq_gap = (freq_mis.final_test_mse - freq_al.final_test_mse).abs();
        let mse_gap = (mse_mis.final_test_mse - mse_al.final_test_mse).abs();
        let fraction = mse_al.final_test_mse / mse_al.untrained_test_mse;
        a += usize::from(freq_mis.final_test_mse < mse_mis.final_test_mse);
        b += usize::from(freq_gap < mse_gap);
        c += usize::from(fraction < 0.1);
        lines.push(format!(
            "seed {seed}: misaligned freq {:.2e} vs mse {:.2e}, gap freq {freq_gap:.2e} vs mse {mse_gap:.2e}, aligned mse/untrained {:.1}%",
            freq_mis.final_test_mse,
            mse_mis.final_test_mse,
            100.0 * fraction
        ));
    }
    for l in &lines {
        println!("    {l}");
    }
    check(a >= 4 && b >= 4 && c == 5, format!("(a) {a}/5 (b) {b}/5 (c) {c}/5"))
}

fn criterion_7() -> Outcome {
    let mut r = rng(1007);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let c = r.random_range(1..=3);
        let h = r.random_range(4..=24);
        let w = r.random_range(4..=24);
        let x = uniform(&mut r, &[c, h, w], 0.0, 1.0);
        worst = worst.max(spectral::mix_frequency(&x, &x).unwrap().max_abs_diff(&x));
    }

    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.ppm");
    let img = synthetic_scene(3, 32, 48, 7).unwrap();
    write_pnm(&input, &img).unwrap();
    let quantized = read_pnm(&input).unwrap();
    let out = dir.path().join("mix");
    let status = Command::new(env!("CARGO_BIN_EXE_fdl"))
        .args(["mix", "--amp", input.to_str().unwrap(), "--phase", input.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    let cli = if status.status.success() {
        read_pnm(out.join("mixed.ppm")).unwrap().max_abs_diff(&quantized)
    } else {
        f64::INFINITY
    };
    check(
        worst <= MIX_TOL && cli <= 1.0 / 255.0,
        format!("mix(x, x) max error {worst:.1e} on 50 images; CLI self-mix {:.2}/255", cli * 255.0),
    )
}

fn small_pyramid() -> ExtractorSpec {
    ExtractorSpec::Pyramid(PyramidSpec {
        channels: vec![4, 8],
        ..PyramidSpec::default()
    })
}

fn all_losses(u: &RealTensor, v: &RealTensor, cfg: &FdlConfig, eval_id: u64) -> [f64; 5] {
    [
        losses::fdl_value(u, v, cfg, eval_id).unwrap(),
        losses::spatial_swd_value(u, v, cfg, eval_id).unwrap(),
        losses::style_loss_value(u, v, cfg, eval_id).unwrap(),
        losses::content_loss_value(u, v, cfg, eval_id).unwrap(),
        losses::mse_value(u, v).unwrap(),
    ]
}

fn criterion_8() -> Outcome {
    let mut r = rng(1008);
    let identity = FdlConfig {
        projections: 32,
        master_seed: 8,
        ..FdlConfig::default()
    };
    let pyramid = FdlConfig {
        extractor: small_pyramid(),
        ..identity.clone()
    };

    let mut zero = 0.0f64;
    let mut negative = 0;
    for i in 0..200u64 {
        let cfg = if i % 4 == 0 { &pyramid } else { &identity };
        let u = uniform(&mut r, &[3, 16, 16], 0.0, 1.0);
        let v = uniform(&mut r, &[3, 16, 16], 0.0, 1.0);
        let s = uniform(&mut r, &[32], -1.0, 1.0);
        let t = uniform(&mut r, &[32], -1.0, 1.0);
        if i < 20 {
            zero = all_losses(&u, &u, cfg, i).into_iter().fold(zero, f64::max);
            zero = zero.max(losses::freq_wd_1d_value(&s, &s).unwrap());
        }
        let values = all_losses(&u, &v, cfg, i);
        negative += values.iter().filter(|&&x| !(x >= 0.0)).count();
        negative += usize::from(!(losses::freq_wd_1d_value(&s, &t).unwrap() >= 0.0));
    }

    let u = uniform(&mut r, &[3, 32, 32], 0.0, 1.0);
    let v = uniform(&mut r, &[3, 32, 32], 0.0, 1.0);
    let on = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| (all_losses(&u, &v, &identity, 3), all_losses(&u, &v, &pyramid, 3)))
    };
    let reference = on(1);
    let in_process = reference == on(1) && reference == on(4);

    let dir = tempfile::tempdir().unwrap();
    let (pa, pb) = (dir.path().join("a.ppm"), dir.path().join("b.ppm"));
    write_pnm(&pa, &synthetic_scene(3, 32, 32, 1).unwrap()).unwrap();
    write_pnm(&pb, &synthetic_scene(3, 32, 32, 2).unwrap()).unwrap();
    let cli = |threads: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_fdl"))
            .args(["loss", "--seed", "8", "--a", pa.to_str().unwrap(), "--b", pb.to_str().unwrap()])
            .args(["--extractor", "pyramid", "--projections", "32", "--threads", threads])
            .output()
            .unwrap();
        String::from_utf8_lossy(&o.stdout).into_owned()
    };
    let first = cli("1");
    let across_cli = !first.trim().is_empty() && first == cli("1") && first == cli("4");

    check(
        zero <= LOSS_ZERO_TOL && negative == 0 && in_process && across_cli,
        format!(
            "max loss on equal inputs {zero:.1e}; negative values {negative}; bit-identical across 1/4 threads: library {in_process}, CLI {across_cli}"
        ),
    )
}

fn criterion_9() -> Outcome {
    let content = synthetic_scene(3, 128, 128, 11).unwrap();
    let style = synthetic_scene(3, 128, 128, 12).unwrap();
    let cfg = FdlConfig {
        lambda: STYLE_LAMBDA,
        projections: STYLE_PROJECTIONS,
        master_seed: 9,
        extractor: ExtractorSpec::Pyramid(PyramidSpec::default()),
        layer_weights: None,
    };
    let opts = StyleOptions {
        steps: 300,
        ..StyleOptions::default()
    };
    let out = style_transfer(&content, &style, &cfg, &opts).unwrap();
    let ratio = out.final_.objective / out.initial.objective;

    let frozen = style_transfer(&content, &style, &cfg, &StyleOptions { beta: 0.0, ..opts }).unwrap();
    let drift = losses::content_loss_value(&frozen.image, &content, &cfg, 0).unwrap();
    check(
        ratio < STYLE_OBJECTIVE_RATIO && drift <= CONTENT_DRIFT_TOL,
        format!(
            "objective {:.4} → {:.4} (ratio {ratio:.3}, k = {STYLE_PROJECTIONS}); β=0 content drift {drift:.1e}",
            out.initial.objective, out.final_.objective
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Outcome, u64); 9] = [
        (1, criterion_1, 5),
        (2, criterion_2, 60),
        (3, criterion_3, 10),
        (4, criterion_4, 60),
        (5, criterion_5, 30),
        (6, criterion_6, 600),
        (7, criterion_7, 60),
        (8, criterion_8, 60),
        (9, criterion_9, 300),
    ];
    // Optional criterion numbers on the command line select a subset.
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (n, run, budget) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = within(run(), start.elapsed(), Duration::from_secs(budget));
        println!("criterion {n}: {} {}", if outcome.pass { "PASS" } else { "FAIL" }, outcome.detail);
        failed += usize::from(!outcome.pass);
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
