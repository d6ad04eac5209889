//! Command-line front end. Exit codes: 0 success, 1 runtime failure,
//! 2 usage error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::experiments::{CurveLoss, LossKind};
use crate::features::{ExtractorSpec, PyramidSpec};
use crate::numerics::Padding;

#[derive(Debug, Parser)]
#[command(name = "fdl", version, about = "Frequency distribution loss experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the residual 1-D model under each loss on (mis)aligned pairs.
    Toy1d(Toy1dArgs),
    /// Loss between an image and its circular shifts.
    ShiftCurve(ShiftCurveArgs),
    /// Amplitude spectrum of one image with the phase spectrum of another.
    Mix(MixArgs),
    /// Print one loss value between two images or tensors.
    Loss(LossArgs),
    /// Style transfer by pixel optimization.
    Style(StyleArgs),
}

#[derive(Debug, Args)]
pub struct RunFlags {
    /// Worker threads for parallel kernels; results do not depend on it.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExtractorKind {
    Identity,
    Pyramid,
    External,
}

#[derive(Debug, Args)]
pub struct LossFlags {
    /// Weight of the phase term.
    #[arg(long, value_parser = non_negative)]
    pub lambda: Option<f64>,
    /// Slicing directions per layer and evaluation.
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u32).range(1..))]
    pub projections: u32,
    #[arg(long, value_enum)]
    pub extractor: Option<ExtractorKind>,
    /// Pyramid channel counts per level.
    #[arg(long, value_delimiter = ',', default_value = "8,16,16,32,32")]
    pub pyramid_channels: Vec<usize>,
    #[arg(long, default_value_t = 0x5EED)]
    pub pyramid_seed: u64,
    /// Zero instead of circular padding in the pyramid.
    #[arg(long)]
    pub zero_padding: bool,
}

impl LossFlags {
    fn extractor(&self, default: ExtractorKind, external: Vec<PathBuf>) -> ExtractorSpec {
        match self.extractor.unwrap_or(default) {
            ExtractorKind::Identity => ExtractorSpec::Identity,
            ExtractorKind::Pyramid => ExtractorSpec::Pyramid(PyramidSpec {
                channels: self.pyramid_channels.clone(),
                seed: self.pyramid_seed,
                padding: if self.zero_padding { Padding::Zero } else { Padding::Circular },
                ..PyramidSpec::default()
            }),
            ExtractorKind::External => ExtractorSpec::External(external),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ToyLossArg {
    Mse,
    Spa,
    Freq,
}

impl From<ToyLossArg> for LossKind {
    fn from(a: ToyLossArg) -> Self {
        match a {
            ToyLossArg::Mse => LossKind::Mse,
            ToyLossArg::Spa => LossKind::Spa,
            ToyLossArg::Freq => LossKind::Freq,
        }
    }
}

#[derive(Debug, Args)]
pub struct Toy1dArgs {
    #[arg(long, required = true)]
    pub seed: u64,
    /// Training losses; repeat for several. All three by default.
    #[arg(long = "loss", value_enum)]
    pub losses: Vec<ToyLossArg>,
    /// Largest circular target shift; 0 trains on aligned pairs.
    #[arg(long, default_value_t = 8)]
    pub misalign: usize,
    #[arg(long, default_value_t = 128)]
    pub pairs: usize,
    #[arg(long, default_value_t = 128)]
    pub length: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 5e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 128)]
    pub test_pairs: usize,
    /// Fill the `seconds` column with wall-clock time (makes reports differ
    /// between runs).
    #[arg(long)]
    pub record_time: bool,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CurveLossArg {
    Mse,
    Fdl,
    FdlAmp,
    SpatialSwd,
}

impl From<CurveLossArg> for CurveLoss {
    fn from(a: CurveLossArg) -> Self {
        match a {
            CurveLossArg::Mse => CurveLoss::Mse,
            CurveLossArg::Fdl => CurveLoss::Fdl,
            CurveLossArg::FdlAmp => CurveLoss::FdlAmplitude,
            CurveLossArg::SpatialSwd => CurveLoss::SpatialSwd,
        }
    }
}

#[derive(Debug, Args)]
pub struct ShiftCurveArgs {
    #[arg(long, required = true)]
    pub seed: u64,
    /// Input image; a 3×128×128 synthetic scene from `--seed` if omitted.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[arg(long = "max", default_value_t = 16)]
    pub max_shift: usize,
    /// Losses to trace; all by default.
    #[arg(long = "kind", value_enum)]
    pub kinds: Vec<CurveLossArg>,
    #[command(flatten)]
    pub loss: LossFlags,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Args)]
pub struct MixArgs {
    /// Image providing the amplitude spectrum.
    #[arg(long)]
    pub amp: PathBuf,
    /// Image providing the phase spectrum.
    #[arg(long)]
    pub phase: PathBuf,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossKindArg {
    Fdl,
    SpatialSwd,
    Mse,
    FreqWd1d,
    Style,
    Content,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long, required = true)]
    pub seed: u64,
    /// First operand (PGM/PPM image or FTNS tensor).
    #[arg(long, required_unless_present = "features_a")]
    pub a: Option<PathBuf>,
    #[arg(long, required_unless_present = "features_b")]
    pub b: Option<PathBuf>,
    /// External feature layers of the first operand (FTNS, in layer order).
    #[arg(long, value_delimiter = ',')]
    pub features_a: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub features_b: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = LossKindArg::Fdl)]
    pub kind: LossKindArg,
    #[arg(long, default_value_t = 0)]
    pub eval_id: u64,
    #[command(flatten)]
    pub loss: LossFlags,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
    /// Directory for the run record; nothing is written if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StyleArgs {
    #[arg(long, required = true)]
    pub seed: u64,
    #[arg(long)]
    pub content: PathBuf,
    #[arg(long)]
    pub style: PathBuf,
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    pub beta: f64,
    #[arg(long, default_value_t = 300)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.02)]
    pub lr: f64,
    /// Resize both images to SIZE×SIZE; otherwise the style image is resized
    /// to the content image.
    #[arg(long)]
    pub size: Option<usize>,
    #[command(flatten)]
    pub loss: LossFlags,
    #[command(flatten)]
    pub run: RunFlags,
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("expected a finite value ≥ 0, got {s}"))
    }
}

/// Parses the process arguments and runs the command.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
