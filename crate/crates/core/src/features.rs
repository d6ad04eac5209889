//! Feature extractors and the conversion of feature maps into sample sets.
//!
//! A feature map `C×H×W` becomes `H·W` samples of dimension `C`: either the
//! raw channel vectors at each location ([`spatial_samples`]) or the channel
//! vectors of amplitudes / phases at each frequency bin of the per-channel
//! 2-D spectrum ([`spectrum_samples`]).

use std::path::PathBuf;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{load_ftns, Padding, RealTensor, Tape, Var};
use crate::rng;
use crate::spectral::{diff, DftAxes};
use crate::transport::SampleSet;

/// Per-layer feature maps with their loss weights.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStack {
    layers: Vec<RealTensor>,
    weights: Vec<f64>,
}

impl FeatureStack {
    pub fn new(layers: Vec<RealTensor>, weights: Vec<f64>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("feature stack needs at least one layer".into()));
        }
        if layers.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} layers but {} weights",
                layers.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("layer weights must be finite and nonnegative".into()));
        }
        for layer in &layers {
            if layer.rank() != 3 {
                return Err(Error::shape("feature stack", layer.shape(), "layers must be C×H×W"));
            }
            if !layer.is_finite() {
                return Err(Error::NonFinite("feature layer".into()));
            }
        }
        Ok(Self { layers, weights })
    }

    /// Unit weight on every layer.
    pub fn uniform(layers: Vec<RealTensor>) -> Result<Self> {
        let weights = vec![1.0; layers.len()];
        Self::new(layers, weights)
    }

    pub fn layers(&self) -> &[RealTensor] {
        &self.layers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

/// Frozen random convolution pyramid. Level 0 is a stride-1 conv + relu on
/// the image; each further level is a stride-2 conv + relu on the previous one.
#[derive(Clone, Debug, PartialEq)]
pub struct PyramidSpec {
    pub channels: Vec<usize>,
    pub kernel_size: usize,
    pub seed: u64,
    pub padding: Padding,
}

impl Default for PyramidSpec {
    fn default() -> Self {
        Self {
            channels: vec![8, 16, 16, 32, 32],
            kernel_size: 3,
            seed: 0x5EED,
            padding: Padding::Circular,
        }
    }
}

impl PyramidSpec {
    pub fn depth(&self) -> usize {
        self.channels.len()
    }

    /// Frozen kernels for an image with `in_channels` channels, He-normal
    /// scaled and fully determined by the seed.
    pub fn kernels(&self, in_channels: usize) -> Vec<RealTensor> {
        let mut rng = rng::seeded(rng::derive_seed(self.seed, &[in_channels as u64]));
        let k = self.kernel_size;
        let mut c_in = in_channels;
        self.channels
            .iter()
            .map(|&c_out| {
                let std = (2.0 / (c_in * k * k) as f64).sqrt();
                let data = (0..c_out * c_in * k * k)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        std * z
                    })
                    .collect();
                let t = RealTensor::new(vec![c_out, c_in, k, k], data).expect("kernel shape");
                c_in = c_out;
                t
            })
            .collect()
    }

    fn validate(&self, shape: &[usize]) -> Result<()> {
        if self.channels.is_empty() || self.channels.contains(&0) {
            return Err(Error::InvalidArgument("pyramid needs depth ≥ 1 and positive channel counts".into()));
        }
        if self.kernel_size.is_multiple_of(2) {
            return Err(Error::InvalidArgument("pyramid kernel size must be odd".into()));
        }
        let &[_, h, w] = shape else {
            return Err(Error::shape("pyramid", shape, "expected a C×H×W image"));
        };
        let factor = 1usize << (self.depth() - 1);
        if h < 8 || w < 8 || h % factor != 0 || w % factor != 0 || h / factor < 1 {
            return Err(Error::shape(
                "pyramid",
                shape,
                format!("depth {} needs H, W ≥ 8 and divisible by {factor}", self.depth()),
            ));
        }
        Ok(())
    }
}

/// Which feature extractor to apply.
#[derive(Clone, Debug, PartialEq)]
pub enum ExtractorSpec {
    /// The image itself as the single layer.
    Identity,
    Pyramid(PyramidSpec),
    /// Precomputed layers, one FTNS file (`C×H×W`) per layer in order.
    External(Vec<PathBuf>),
}

impl ExtractorSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ExtractorSpec::Identity => "identity",
            ExtractorSpec::Pyramid(_) => "pyramid",
            ExtractorSpec::External(_) => "external",
        }
    }

    /// Feature layers of `image` recorded on `tape`. External layers enter as
    /// constants.
    pub fn extract_var(&self, tape: &mut Tape, image: Var) -> Result<Vec<Var>> {
        match self {
            ExtractorSpec::Identity => Ok(vec![image]),
            ExtractorSpec::Pyramid(spec) => {
                spec.validate(tape.shape(image))?;
                let kernels = spec.kernels(tape.shape(image)[0]);
                let mut layers = Vec::with_capacity(kernels.len());
                let mut x = image;
                for (level, kernel) in kernels.into_iter().enumerate() {
                    let kv = tape.constant(kernel);
                    let stride = if level == 0 { 1 } else { 2 };
                    let conv = tape.conv(x, kv, stride, spec.padding)?;
                    x = tape.relu(conv);
                    layers.push(x);
                }
                Ok(layers)
            }
            ExtractorSpec::External(_) => Ok(self
                .load_external()?
                .into_iter()
                .map(|t| tape.constant(t))
                .collect()),
        }
    }

    fn load_external(&self) -> Result<Vec<RealTensor>> {
        let ExtractorSpec::External(paths) = self else {
            unreachable!("only called for external extractors")
        };
        if paths.is_empty() {
            return Err(Error::InvalidArgument("external extractor lists no files".into()));
        }
        paths
            .iter()
            .map(|p| {
                let t = load_ftns(p)?;
                if t.rank() != 3 {
                    return Err(Error::shape("external feature", t.shape(), "expected C×H×W").in_file(p));
                }
                Ok(t)
            })
            .collect()
    }
}

/// Applies `spec` to a `C×H×W` image; every layer gets weight 1.
pub fn extract(spec: &ExtractorSpec, image: &RealTensor) -> Result<FeatureStack> {
    if image.rank() != 3 {
        return Err(Error::shape("extract", image.shape(), "expected a C×H×W image"));
    }
    let mut tape = Tape::new();
    let x = tape.constant(image.clone());
    let layers = spec.extract_var(&mut tape, x)?;
    FeatureStack::uniform(layers.into_iter().map(|v| tape.value(v).clone()).collect())
}

fn layer_dims(tape: &Tape, layer: Var) -> Result<(usize, usize)> {
    match *tape.shape(layer) {
        [c, h, w] => Ok((c, h * w)),
        _ => Err(Error::shape("samples", tape.shape(layer), "expected a C×H×W layer")),
    }
}

fn channels_to_samples(tape: &mut Tape, x: Var, c: usize, n: usize) -> Result<Var> {
    let flat = tape.reshape(x, &[c, n])?;
    tape.transpose(flat)
}

/// Amplitude and phase samples (`H·W × C` each) of a `C×H×W` layer.
pub fn spectrum_samples_var(tape: &mut Tape, layer: Var) -> Result<(Var, Var)> {
    let (c, n) = layer_dims(tape, layer)?;
    let (amp, phase) = diff::amplitude_phase(tape, layer, DftAxes::Last2)?;
    Ok((channels_to_samples(tape, amp, c, n)?, channels_to_samples(tape, phase, c, n)?))
}

/// Channel vectors at each spatial location (`H·W × C`).
pub fn spatial_samples_var(tape: &mut Tape, layer: Var) -> Result<Var> {
    let (c, n) = layer_dims(tape, layer)?;
    channels_to_samples(tape, layer, c, n)
}

pub fn spectrum_samples(layer: &RealTensor) -> Result<(SampleSet, SampleSet)> {
    let mut tape = Tape::new();
    let x = tape.constant(layer.clone());
    let (a, p) = spectrum_samples_var(&mut tape, x)?;
    Ok((
        SampleSet::from_tensor(tape.value(a))?,
        SampleSet::from_tensor(tape.value(p))?,
    ))
}

pub fn spatial_samples(layer: &RealTensor) -> Result<SampleSet> {
    let mut tape = Tape::new();
    let x = tape.constant(layer.clone());
    let s = spatial_samples_var(&mut tape, x)?;
    SampleSet::from_tensor(tape.value(s))
}
