use std::fs;
use std::path::{Path, PathBuf};

use super::{
    Command, ExtractorKind, LossArgs, LossFlags, LossKindArg, MixArgs, RunFlags, ShiftCurveArgs, StyleArgs,
    Toy1dArgs,
};
use crate::error::{Error, Result};
use crate::experiments::{self, CurveLoss, LossKind, StyleOptions, Toy1dOptions};
use crate::features::{ExtractorSpec, FeatureStack};
use crate::io::{self, fmt_f64, write_csv, RunConfig};
use crate::losses::{self, FdlConfig};
use crate::numerics::save_ftns;
use crate::spectral;

pub(super) fn run(command: Command) -> Result<()> {
    match command {
        Command::Toy1d(a) => toy1d(a),
        Command::ShiftCurve(a) => shift_curve(a),
        Command::Mix(a) => mix(a),
        Command::Loss(a) => loss(a),
        Command::Style(a) => style(a),
    }
}

fn set_threads(threads: Option<u32>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("cannot configure {n} threads: {e}")))?;
    }
    Ok(())
}

fn prepare_out(run: &RunFlags) -> Result<&Path> {
    set_threads(run.threads)?;
    fs::create_dir_all(&run.out).map_err(|e| Error::from(e).in_file(&run.out))?;
    Ok(&run.out)
}

fn record_threads(cfg: &mut RunConfig, threads: Option<u32>) -> Result<()> {
    cfg.set("threads", threads.map_or("default".to_string(), |t| t.to_string()))
}

fn record_loss_config(rc: &mut RunConfig, cfg: &FdlConfig) -> Result<()> {
    rc.set("lambda", cfg.lambda)?;
    rc.set("projections", cfg.projections)?;
    rc.set("master_seed", cfg.master_seed)?;
    rc.set("extractor", cfg.extractor.kind())?;
    match &cfg.extractor {
        ExtractorSpec::Pyramid(p) => {
            rc.set("pyramid_channels", join(&p.channels))?;
            rc.set("pyramid_kernel", p.kernel_size)?;
            rc.set("pyramid_seed", p.seed)?;
            rc.set("pyramid_padding", format!("{:?}", p.padding).to_lowercase())?;
        }
        ExtractorSpec::External(paths) => rc.set("external_features", join_paths(paths))?,
        ExtractorSpec::Identity => {}
    }
    Ok(())
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn join_paths(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(",")
}

fn fdl_config(flags: &LossFlags, seed: u64, default_extractor: ExtractorKind, external: Vec<PathBuf>, default_lambda: f64) -> FdlConfig {
    FdlConfig {
        lambda: flags.lambda.unwrap_or(default_lambda),
        projections: flags.projections as usize,
        master_seed: seed,
        extractor: flags.extractor(default_extractor, external),
        layer_weights: None,
    }
}

fn toy1d(a: Toy1dArgs) -> Result<()> {
    let out = prepare_out(&a.run)?;
    let kinds: Vec<LossKind> = if a.losses.is_empty() {
        LossKind::ALL.to_vec()
    } else {
        a.losses.iter().map(|&k| k.into()).collect()
    };
    let opts = Toy1dOptions {
        epochs: a.epochs,
        lr: a.lr,
        test_pairs: a.test_pairs,
        ..Toy1dOptions::default()
    };
    let ds = experiments::gen_toy1d(a.pairs, a.length, a.misalign, a.seed)?;

    let mut rc = RunConfig::new("toy1d");
    rc.set("seed", a.seed)?;
    rc.set("losses", join(&kinds))?;
    rc.set("misalign", a.misalign)?;
    rc.set("pairs", a.pairs)?;
    rc.set("length", a.length)?;
    rc.set("epochs", opts.epochs)?;
    rc.set("lr", opts.lr)?;
    rc.set("hidden", opts.hidden)?;
    rc.set("kernel", opts.kernel)?;
    rc.set("test_pairs", opts.test_pairs)?;
    rc.set("record_time", a.record_time)?;
    record_threads(&mut rc, a.run.threads)?;
    rc.save(out.join("config.txt"))?;

    let pred_dir = out.join("predictions");
    fs::create_dir_all(&pred_dir).map_err(|e| Error::from(e).in_file(&pred_dir))?;
    for (i, (x, y)) in experiments::toy1d::test_pairs(&ds, opts.test_pairs).iter().enumerate() {
        save_ftns(pred_dir.join(format!("input_{i:03}.ftns")), x)?;
        save_ftns(pred_dir.join(format!("truth_{i:03}.ftns")), y)?;
    }

    let mut rows = Vec::new();
    for kind in kinds {
        let report = experiments::train_toy1d(&ds, kind, &opts, a.seed)?;
        let seconds = if a.record_time { fmt_f64(report.seconds) } else { String::new() };
        for (epoch, &l) in report.epoch_losses.iter().enumerate() {
            rows.push(vec![
                kind.to_string(),
                report.aligned.to_string(),
                epoch.to_string(),
                fmt_f64(l),
                fmt_f64(report.final_test_mse),
                seconds.clone(),
            ]);
        }
        for (i, p) in report.predictions.iter().enumerate() {
            save_ftns(pred_dir.join(format!("{kind}_{i:03}.ftns")), p)?;
        }
        println!(
            "{kind}: final test mse {} (untrained {})",
            report.final_test_mse, report.untrained_test_mse
        );
    }
    write_csv(
        out.join("report.csv"),
        &["loss_kind", "aligned", "epoch", "train_loss", "final_test_mse", "seconds"],
        &rows,
    )
}

fn reject_external(cfg: &FdlConfig, command: &str) -> Result<()> {
    if let ExtractorSpec::External(_) = cfg.extractor {
        return Err(Error::InvalidArgument(format!(
            "{command} computes features from images; use the identity or pyramid extractor"
        )));
    }
    Ok(())
}

fn shift_curve(a: ShiftCurveArgs) -> Result<()> {
    let out = prepare_out(&a.run)?;
    let cfg = fdl_config(&a.loss, a.seed, ExtractorKind::Identity, Vec::new(), 1.0);
    reject_external(&cfg, "shift-curve")?;
    let image = match &a.image {
        Some(p) => io::load_tensor(p)?,
        None => experiments::synthetic_scene(3, 128, 128, a.seed)?,
    };
    let kinds: Vec<CurveLoss> = if a.kinds.is_empty() {
        CurveLoss::ALL.to_vec()
    } else {
        a.kinds.iter().map(|&k| k.into()).collect()
    };

    let mut rc = RunConfig::new("shift-curve");
    rc.set("seed", a.seed)?;
    rc.set("image", a.image.as_ref().map_or("synthetic".into(), |p| p.display().to_string()))?;
    rc.set("max_shift", a.max_shift)?;
    rc.set("kinds", join(&kinds))?;
    record_loss_config(&mut rc, &cfg)?;
    record_threads(&mut rc, a.run.threads)?;
    rc.save(out.join("config.txt"))?;

    let rows = experiments::shift_curve(&image, &kinds, a.max_shift, &cfg)?;
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.kind.to_string(), r.shift.to_string(), fmt_f64(r.value), fmt_f64(r.normalized)])
        .collect();
    write_csv(out.join("curve.csv"), &["loss_kind", "shift", "value", "normalized"], &rows)
}

fn mix(a: MixArgs) -> Result<()> {
    let out = prepare_out(&a.run)?;
    let q = io::load_tensor(&a.amp)?;
    let d = io::load_tensor(&a.phase)?;
    let mixed = spectral::mix_frequency(&q, &d)?;

    let mut rc = RunConfig::new("mix");
    rc.set("amp", a.amp.display())?;
    rc.set("phase", a.phase.display())?;
    record_threads(&mut rc, a.run.threads)?;
    rc.save(out.join("config.txt"))?;

    save_ftns(out.join("mixed.ftns"), &mixed)?;
    if matches!(mixed.shape(), [1 | 3, _, _] | [_, _]) {
        let name = format!("mixed.{}", io::pnm::extension_for(&mixed));
        io::write_pnm(out.join(name), &mixed)?;
    }
    Ok(())
}

fn loss(a: LossArgs) -> Result<()> {
    set_threads(a.threads)?;
    let external = !a.features_a.is_empty() || !a.features_b.is_empty();
    let default_kind = if external { ExtractorKind::External } else { ExtractorKind::Identity };
    let cfg = fdl_config(&a.loss, a.seed, default_kind, a.features_a.clone(), 1.0);

    let value = if let ExtractorSpec::External(_) = cfg.extractor {
        if a.kind != LossKindArg::Fdl && a.kind != LossKindArg::Style {
            return Err(Error::InvalidArgument("external features support only --kind fdl or style".into()));
        }
        if a.features_a.is_empty() || a.features_b.is_empty() {
            return Err(Error::InvalidArgument("external features need both --features-a and --features-b".into()));
        }
        let load = |paths: &[PathBuf]| -> Result<FeatureStack> {
            let stack = paths.iter().map(io::load_tensor).collect::<Result<Vec<_>>>()?;
            FeatureStack::uniform(stack)
        };
        losses::fdl_stacks(&load(&a.features_a)?, &load(&a.features_b)?, &cfg, a.eval_id)?
    } else {
        let (pa, pb) = match (&a.a, &a.b) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(Error::InvalidArgument("--a and --b are required".into())),
        };
        let u = io::load_tensor(pa)?;
        let v = io::load_tensor(pb)?;
        if u.shape() != v.shape() {
            return Err(Error::InvalidArgument(format!(
                "input shapes differ: {:?} ({}) vs {:?} ({})",
                u.shape(),
                pa.display(),
                v.shape(),
                pb.display()
            )));
        }
        match a.kind {
            LossKindArg::Fdl => losses::fdl_value(&u, &v, &cfg, a.eval_id)?,
            LossKindArg::Style => losses::style_loss_value(&u, &v, &cfg, a.eval_id)?,
            LossKindArg::Content => losses::content_loss_value(&u, &v, &cfg, a.eval_id)?,
            LossKindArg::SpatialSwd => losses::spatial_swd_value(&u, &v, &cfg, a.eval_id)?,
            LossKindArg::Mse => losses::mse_value(&u, &v)?,
            LossKindArg::FreqWd1d => losses::freq_wd_1d_value(&u, &v)?,
        }
    };

    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
        let mut rc = RunConfig::new("loss");
        rc.set("kind", format!("{:?}", a.kind).to_lowercase())?;
        rc.set("a", a.a.as_ref().map_or(String::new(), |p| p.display().to_string()))?;
        rc.set("b", a.b.as_ref().map_or(String::new(), |p| p.display().to_string()))?;
        rc.set("features_a", join_paths(&a.features_a))?;
        rc.set("features_b", join_paths(&a.features_b))?;
        rc.set("eval_id", a.eval_id)?;
        record_loss_config(&mut rc, &cfg)?;
        record_threads(&mut rc, a.threads)?;
        rc.set("value", value)?;
        rc.save(dir.join("config.txt"))?;
    }
    println!("{value}");
    Ok(())
}

fn style(a: StyleArgs) -> Result<()> {
    let out = prepare_out(&a.run)?;
    let cfg = fdl_config(&a.loss, a.seed, ExtractorKind::Pyramid, Vec::new(), 1.0);
    reject_external(&cfg, "style")?;
    let content = io::load_tensor(&a.content)?;
    let style = io::load_tensor(&a.style)?;
    let (c, s) = match a.size {
        Some(n) => (
            experiments::resize_bilinear(&content, n, n)?,
            experiments::resize_bilinear(&style, n, n)?,
        ),
        None => {
            let &[_, h, w] = content.shape() else {
                return Err(Error::InvalidArgument(format!("content image has shape {:?}", content.shape())));
            };
            (content.clone(), experiments::resize_bilinear(&style, h, w)?)
        }
    };
    if c.shape() != s.shape() {
        return Err(Error::InvalidArgument(format!(
            "content and style channel layouts differ: {:?} vs {:?}",
            c.shape(),
            s.shape()
        )));
    }
    let opts = StyleOptions {
        alpha: a.alpha,
        beta: a.beta,
        steps: a.steps,
        lr: a.lr,
    };

    let mut rc = RunConfig::new("style");
    rc.set("content", a.content.display())?;
    rc.set("style", a.style.display())?;
    rc.set("shape", join(c.shape()))?;
    rc.set("alpha", opts.alpha)?;
    rc.set("beta", opts.beta)?;
    rc.set("steps", opts.steps)?;
    rc.set("lr", opts.lr)?;
    record_loss_config(&mut rc, &cfg)?;
    record_threads(&mut rc, a.run.threads)?;
    rc.save(out.join("config.txt"))?;

    let result = experiments::style_transfer(&c, &s, &cfg, &opts)?;
    let mut rows: Vec<Vec<String>> = result
        .trace
        .iter()
        .map(|r| vec![r.step.to_string(), fmt_f64(r.content), fmt_f64(r.style), fmt_f64(r.objective)])
        .collect();
    let f = result.final_;
    rows.push(vec![f.step.to_string(), fmt_f64(f.content), fmt_f64(f.style), fmt_f64(f.objective)]);
    write_csv(out.join("trace.csv"), &["step", "content", "style", "objective"], &rows)?;
    save_ftns(out.join("stylized.ftns"), &result.image)?;
    if matches!(result.image.shape(), [1 | 3, _, _]) {
        let name = format!("stylized.{}", io::pnm::extension_for(&result.image));
        io::write_pnm(out.join(name), &result.image)?;
    }
    println!(
        "objective {} -> {} (ratio {})",
        result.initial.objective,
        f.objective,
        f.objective / result.initial.objective
    );
    Ok(())
}
