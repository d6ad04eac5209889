//! Training objectives: the frequency distribution loss (sliced Wasserstein
//! distances between amplitude and phase samples of features), its 1-D
//! frequency variant, spatial sliced Wasserstein, MSE, and the style/content
//! pair used for pixel optimization.
//!
//! Every loss has a tape form (returns a scalar [`Var`]) and a plain `*_value`
//! form. Stochastic losses take an `eval_id`: together with the config's
//! master seed it fixes the projection bank of each layer, so a given
//! `(config, eval_id)` always produces the same value and gradient.

use crate::error::{Error, Result};
use crate::features::{spatial_samples_var, spectrum_samples_var, ExtractorSpec, FeatureStack};
use crate::numerics::{RealTensor, Tape, Var};
use crate::rng;
use crate::spectral::{diff, DftAxes};
use crate::transport::{make_projections, sliced_wd_var, wd1d_var, ProjectionBank};

/// Default number of slicing directions per layer and evaluation.
pub const DEFAULT_PROJECTIONS: usize = 256;

/// Everything that determines a loss evaluation apart from `eval_id`.
#[derive(Clone, Debug, PartialEq)]
pub struct FdlConfig {
    /// Weight of the phase term.
    pub lambda: f64,
    pub projections: usize,
    pub master_seed: u64,
    pub extractor: ExtractorSpec,
    /// Overrides the extractor's per-layer weights (all 1) when set.
    pub layer_weights: Option<Vec<f64>>,
}

impl Default for FdlConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            projections: DEFAULT_PROJECTIONS,
            master_seed: 0,
            extractor: ExtractorSpec::Identity,
            layer_weights: None,
        }
    }
}

impl FdlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!("lambda must be ≥ 0, got {}", self.lambda)));
        }
        if self.projections == 0 {
            return Err(Error::InvalidArgument("projection count must be ≥ 1".into()));
        }
        if let Some(w) = &self.layer_weights {
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidArgument("layer weights must be finite and ≥ 0".into()));
            }
        }
        Ok(())
    }

    /// Seed of the projection bank for `layer` at evaluation `eval_id`.
    pub fn bank_seed(&self, eval_id: u64, layer: usize) -> u64 {
        rng::derive_seed(self.master_seed, &[eval_id, layer as u64])
    }

    pub fn bank(&self, eval_id: u64, layer: usize, dim: usize) -> Result<ProjectionBank> {
        make_projections(self.projections, dim, self.bank_seed(eval_id, layer))
    }

    fn weights_for(&self, default: &[f64]) -> Result<Vec<f64>> {
        match &self.layer_weights {
            None => Ok(default.to_vec()),
            Some(w) if w.len() == default.len() => Ok(w.clone()),
            Some(w) => Err(Error::InvalidArgument(format!(
                "{} layer weights configured for {} feature layers",
                w.len(),
                default.len()
            ))),
        }
    }
}

/// Amplitude and phase samples of one feature layer.
#[derive(Clone, Copy, Debug)]
struct FrequencySamples {
    amplitude: Var,
    phase: Var,
}

fn frequency_samples(tape: &mut Tape, layers: &[Var]) -> Result<Vec<FrequencySamples>> {
    layers
        .iter()
        .map(|&l| {
            let (amplitude, phase) = spectrum_samples_var(tape, l)?;
            Ok(FrequencySamples { amplitude, phase })
        })
        .collect()
}

fn check_layers(tape: &Tape, a: &[Var], b: &[Var]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "feature stacks have {} and {} layers",
            a.len(),
            b.len()
        )));
    }
    for (&x, &y) in a.iter().zip(b) {
        if tape.shape(x) != tape.shape(y) {
            return Err(Error::mismatch("feature layer", tape.shape(x), tape.shape(y)));
        }
    }
    Ok(())
}

fn sample_dim(tape: &Tape, samples: Var) -> usize {
    tape.shape(samples)[1]
}

/// `Σ_ℓ w_ℓ·[SW(amp) + λ·SW(phase)]`; with `phase_only` the amplitude term is
/// dropped and the phase term has unit weight.
fn frequency_distance(
    tape: &mut Tape,
    u: &[FrequencySamples],
    v: &[FrequencySamples],
    weights: &[f64],
    cfg: &FdlConfig,
    eval_id: u64,
    phase_only: bool,
) -> Result<Var> {
    let mut terms = Vec::with_capacity(u.len());
    for (layer, ((su, sv), &w)) in u.iter().zip(v).zip(weights).enumerate() {
        let bank = cfg.bank(eval_id, layer, sample_dim(tape, su.amplitude))?;
        let term = if phase_only {
            sliced_wd_var(tape, su.phase, sv.phase, &bank)?
        } else {
            let amp = sliced_wd_var(tape, su.amplitude, sv.amplitude, &bank)?;
            if cfg.lambda == 0.0 {
                amp
            } else {
                let pha = sliced_wd_var(tape, su.phase, sv.phase, &bank)?;
                tape.weighted_sum(&[(amp, 1.0), (pha, cfg.lambda)])?
            }
        };
        terms.push((term, w));
    }
    tape.weighted_sum(&terms)
}

/// Precomputed features belong to one particular image, so they cannot serve
/// both sides of an image comparison; [`fdl_stacks`] compares them directly.
fn reject_external(spec: &ExtractorSpec) -> Result<()> {
    match spec {
        ExtractorSpec::External(_) => Err(Error::InvalidArgument(
            "external features are fixed per image; compare two stacks with fdl_stacks".into(),
        )),
        _ => Ok(()),
    }
}

fn extract_pair(tape: &mut Tape, u: Var, v: Var, cfg: &FdlConfig) -> Result<(Vec<Var>, Vec<Var>, Vec<f64>)> {
    if tape.shape(u) != tape.shape(v) {
        return Err(Error::mismatch("loss", tape.shape(u), tape.shape(v)));
    }
    cfg.validate()?;
    reject_external(&cfg.extractor)?;
    let lu = cfg.extractor.extract_var(tape, u)?;
    let lv = cfg.extractor.extract_var(tape, v)?;
    check_layers(tape, &lu, &lv)?;
    let weights = cfg.weights_for(&vec![1.0; lu.len()])?;
    Ok((lu, lv, weights))
}

/// Frequency distribution loss between images `u` and `v`.
pub fn fdl(tape: &mut Tape, u: Var, v: Var, cfg: &FdlConfig, eval_id: u64) -> Result<Var> {
    let (lu, lv, weights) = extract_pair(tape, u, v, cfg)?;
    let su = frequency_samples(tape, &lu)?;
    let sv = frequency_samples(tape, &lv)?;
    frequency_distance(tape, &su, &sv, &weights, cfg, eval_id, false)
}

pub fn fdl_value(u: &RealTensor, v: &RealTensor, cfg: &FdlConfig, eval_id: u64) -> Result<f64> {
    scalar_of(u, v, |tape, a, b| fdl(tape, a, b, cfg, eval_id))
}

/// Frequency distribution loss between two precomputed feature stacks (for
/// example features exported from another framework). Layer weights come from
/// `cfg.layer_weights` if set, else from `a`.
pub fn fdl_stacks(a: &FeatureStack, b: &FeatureStack, cfg: &FdlConfig, eval_id: u64) -> Result<f64> {
    cfg.validate()?;
    let mut tape = Tape::new();
    let la: Vec<Var> = a.layers().iter().map(|l| tape.constant(l.clone())).collect();
    let lb: Vec<Var> = b.layers().iter().map(|l| tape.constant(l.clone())).collect();
    check_layers(&tape, &la, &lb)?;
    let weights = cfg.weights_for(a.weights())?;
    let sa = frequency_samples(&mut tape, &la)?;
    let sb = frequency_samples(&mut tape, &lb)?;
    let loss = frequency_distance(&mut tape, &sa, &sb, &weights, cfg, eval_id, false)?;
    Ok(scalar(&tape, loss))
}

/// Style objective: the full frequency distribution loss against the style
/// image.
pub fn style_loss(tape: &mut Tape, r: Var, s: Var, cfg: &FdlConfig, eval_id: u64) -> Result<Var> {
    fdl(tape, r, s, cfg, eval_id)
}

/// Content objective: `Σ_ℓ w_ℓ·SW(phase_ℓ(R), phase_ℓ(T))`, sharing the
/// projection banks of [`fdl`] for the same `eval_id`.
pub fn content_loss(tape: &mut Tape, r: Var, t: Var, cfg: &FdlConfig, eval_id: u64) -> Result<Var> {
    let (lr, lt, weights) = extract_pair(tape, r, t, cfg)?;
    let sr = frequency_samples(tape, &lr)?;
    let st = frequency_samples(tape, &lt)?;
    frequency_distance(tape, &sr, &st, &weights, cfg, eval_id, true)
}

pub fn style_loss_value(r: &RealTensor, s: &RealTensor, cfg: &FdlConfig, eval_id: u64) -> Result<f64> {
    fdl_value(r, s, cfg, eval_id)
}

pub fn content_loss_value(r: &RealTensor, t: &RealTensor, cfg: &FdlConfig, eval_id: u64) -> Result<f64> {
    scalar_of(r, t, |tape, a, b| content_loss(tape, a, b, cfg, eval_id))
}

/// Spatial-domain sliced Wasserstein distance between feature channel
/// vectors; blind to where features occur.
pub fn spatial_swd(tape: &mut Tape, u: Var, v: Var, cfg: &FdlConfig, eval_id: u64) -> Result<Var> {
    let (lu, lv, weights) = extract_pair(tape, u, v, cfg)?;
    let mut terms = Vec::with_capacity(lu.len());
    for (layer, ((&a, &b), &w)) in lu.iter().zip(&lv).zip(&weights).enumerate() {
        let sa = spatial_samples_var(tape, a)?;
        let sb = spatial_samples_var(tape, b)?;
        let bank = cfg.bank(eval_id, layer, sample_dim(tape, sa))?;
        terms.push((sliced_wd_var(tape, sa, sb, &bank)?, w));
    }
    tape.weighted_sum(&terms)
}

pub fn spatial_swd_value(u: &RealTensor, v: &RealTensor, cfg: &FdlConfig, eval_id: u64) -> Result<f64> {
    scalar_of(u, v, |tape, a, b| spatial_swd(tape, a, b, cfg, eval_id))
}

/// Mean squared error.
pub fn mse(tape: &mut Tape, u: Var, v: Var) -> Result<Var> {
    let d = tape.sub(u, v)?;
    let sq = tape.mul(d, d)?;
    Ok(tape.mean(sq))
}

pub fn mse_value(u: &RealTensor, v: &RealTensor) -> Result<f64> {
    scalar_of(u, v, mse)
}

/// `WD(amp(u), amp(v)) + WD(phase(u), phase(v))` for 1-D signals, with the
/// bins of each spectrum as the samples. Shapes `[L]` and `[1, L]` (or any
/// shape whose leading extents are all 1) are accepted.
pub fn freq_wd_1d(tape: &mut Tape, u: Var, v: Var) -> Result<Var> {
    let shape = tape.shape(u).to_vec();
    if shape != tape.shape(v) {
        return Err(Error::mismatch("freq_wd_1d", &shape, tape.shape(v)));
    }
    if shape.iter().rev().skip(1).any(|&e| e != 1) {
        return Err(Error::shape("freq_wd_1d", &shape, "expected a single 1-D signal"));
    }
    let (au, pu) = diff::amplitude_phase(tape, u, DftAxes::Last1)?;
    let (av, pv) = diff::amplitude_phase(tape, v, DftAxes::Last1)?;
    let amp = wd1d_var(tape, au, av)?;
    let pha = wd1d_var(tape, pu, pv)?;
    tape.add(amp, pha)
}

pub fn freq_wd_1d_value(u: &RealTensor, v: &RealTensor) -> Result<f64> {
    scalar_of(u, v, freq_wd_1d)
}

/// Spatial 1-D Wasserstein distance between the value distributions of two
/// signals.
pub fn spatial_wd_1d(tape: &mut Tape, u: Var, v: Var) -> Result<Var> {
    if tape.shape(u) != tape.shape(v) {
        return Err(Error::mismatch("spatial_wd_1d", tape.shape(u), tape.shape(v)));
    }
    wd1d_var(tape, u, v)
}

/// Cached frequency samples of a fixed target image, for objectives evaluated
/// many times against the same target.
#[derive(Clone, Debug)]
pub struct TargetFeatures {
    image_shape: Vec<usize>,
    amplitude: Vec<RealTensor>,
    phase: Vec<RealTensor>,
}

impl TargetFeatures {
    pub fn prepare(target: &RealTensor, extractor: &ExtractorSpec) -> Result<Self> {
        reject_external(extractor)?;
        let mut tape = Tape::new();
        let x = tape.constant(target.clone());
        let layers = extractor.extract_var(&mut tape, x)?;
        let samples = frequency_samples(&mut tape, &layers)?;
        Ok(Self {
            image_shape: target.shape().to_vec(),
            amplitude: samples.iter().map(|s| tape.value(s.amplitude).clone()).collect(),
            phase: samples.iter().map(|s| tape.value(s.phase).clone()).collect(),
        })
    }

    fn push(&self, tape: &mut Tape) -> Vec<FrequencySamples> {
        self.amplitude
            .iter()
            .zip(&self.phase)
            .map(|(a, p)| FrequencySamples {
                amplitude: tape.constant(a.clone()),
                phase: tape.constant(p.clone()),
            })
            .collect()
    }

    fn against(&self, tape: &mut Tape, u: &RecordedSamples, cfg: &FdlConfig) -> Result<(Vec<FrequencySamples>, Vec<f64>)> {
        if u.image_shape != self.image_shape {
            return Err(Error::mismatch("loss", &u.image_shape, &self.image_shape));
        }
        cfg.validate()?;
        let st = self.push(tape);
        if u.samples.len() != st.len() {
            return Err(Error::InvalidArgument("target was prepared with a different extractor".into()));
        }
        for (a, b) in u.samples.iter().zip(&st) {
            if tape.shape(a.amplitude) != tape.shape(b.amplitude) {
                return Err(Error::mismatch("feature layer", tape.shape(a.amplitude), tape.shape(b.amplitude)));
            }
        }
        let weights = cfg.weights_for(&vec![1.0; st.len()])?;
        Ok((st, weights))
    }

    /// Same value as [`fdl`] with this target as `v`.
    pub fn fdl(&self, tape: &mut Tape, u: Var, cfg: &FdlConfig, eval_id: u64) -> Result<Var> {
        let su = RecordedSamples::record(tape, u, cfg)?;
        self.fdl_recorded(tape, &su, cfg, eval_id)
    }

    /// Same value as [`content_loss`] with this target as `t`.
    pub fn content(&self, tape: &mut Tape, u: Var, cfg: &FdlConfig, eval_id: u64) -> Result<Var> {
        let su = RecordedSamples::record(tape, u, cfg)?;
        self.content_recorded(tape, &su, cfg, eval_id)
    }

    pub fn fdl_recorded(&self, tape: &mut Tape, u: &RecordedSamples, cfg: &FdlConfig, eval_id: u64) -> Result<Var> {
        let (st, w) = self.against(tape, u, cfg)?;
        frequency_distance(tape, &u.samples, &st, &w, cfg, eval_id, false)
    }

    pub fn content_recorded(&self, tape: &mut Tape, u: &RecordedSamples, cfg: &FdlConfig, eval_id: u64) -> Result<Var> {
        let (st, w) = self.against(tape, u, cfg)?;
        frequency_distance(tape, &u.samples, &st, &w, cfg, eval_id, true)
    }
}

/// Amplitude and phase samples of an image's features recorded on a tape, so
/// one feature pass can be compared against several [`TargetFeatures`].
#[derive(Clone, Debug)]
pub struct RecordedSamples {
    image_shape: Vec<usize>,
    samples: Vec<FrequencySamples>,
}

impl RecordedSamples {
    pub fn record(tape: &mut Tape, u: Var, cfg: &FdlConfig) -> Result<Self> {
        cfg.validate()?;
        reject_external(&cfg.extractor)?;
        let image_shape = tape.shape(u).to_vec();
        let layers = cfg.extractor.extract_var(tape, u)?;
        Ok(Self {
            image_shape,
            samples: frequency_samples(tape, &layers)?,
        })
    }
}

fn scalar(tape: &Tape, v: Var) -> f64 {
    tape.value(v).item().expect("losses are scalar")
}

fn scalar_of(
    u: &RealTensor,
    v: &RealTensor,
    f: impl FnOnce(&mut Tape, Var, Var) -> Result<Var>,
) -> Result<f64> {
    let mut tape = Tape::new();
    let a = tape.constant(u.clone());
    let b = tape.constant(v.clone());
    let out = f(&mut tape, a, b)?;
    Ok(scalar(&tape, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::PyramidSpec;

    fn image(c: usize, h: usize, w: usize, seed: u64) -> RealTensor {
        let data = (0..c * h * w)
            .map(|i| {
                let x = (i as u64).wrapping_mul(6364136223846793005).wrapping_add(seed);
                ((x >> 33) as f64) / (1u64 << 31) as f64
            })
            .collect();
        RealTensor::new(vec![c, h, w], data).unwrap()
    }

    fn cfg(lambda: f64) -> FdlConfig {
        FdlConfig {
            lambda,
            projections: 32,
            master_seed: 9,
            ..FdlConfig::default()
        }
    }

    #[test]
    fn identical_inputs_give_zero() {
        let u = image(2, 8, 8, 1);
        assert_eq!(fdl_value(&u, &u, &cfg(1.0), 0).unwrap(), 0.0);
        assert_eq!(spatial_swd_value(&u, &u, &cfg(1.0), 0).unwrap(), 0.0);
        assert_eq!(content_loss_value(&u, &u, &cfg(1.0), 0).unwrap(), 0.0);
        assert_eq!(mse_value(&u, &u).unwrap(), 0.0);
    }

    #[test]
    fn amplitude_term_ignores_circular_shift() {
        let u = image(3, 16, 16, 2);
        let v = u.roll(2, 5).unwrap().roll(1, 3).unwrap();
        assert!(fdl_value(&u, &v, &cfg(0.0), 3).unwrap() < 1e-10);
        assert!(fdl_value(&u, &v, &cfg(1.0), 3).unwrap() > 1e-3);
    }

    #[test]
    fn symmetric_in_arguments() {
        let u = image(2, 8, 8, 3);
        let v = image(2, 8, 8, 4);
        let c = cfg(0.5);
        assert_eq!(fdl_value(&u, &v, &c, 7).unwrap(), fdl_value(&v, &u, &c, 7).unwrap());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let u = image(1, 8, 8, 0);
        let v = image(1, 8, 4, 0);
        assert!(fdl_value(&u, &v, &cfg(1.0), 0).is_err());
        assert!(mse_value(&u, &v).is_err());
        assert!(spatial_swd_value(&u, &v, &cfg(1.0), 0).is_err());
        assert!(content_loss_value(&u, &v, &cfg(1.0), 0).is_err());
    }

    #[test]
    fn mse_small_case() {
        let u = RealTensor::from_slice(&[0.0, 0.0]);
        let v = RealTensor::from_slice(&[2.0, 0.0]);
        assert_eq!(mse_value(&u, &v).unwrap(), 2.0);
    }

    #[test]
    fn freq_wd_1d_hand_case() {
        let u = RealTensor::from_slice(&[1.0, 0.0, 0.0, 0.0]);
        let v = RealTensor::from_slice(&[2.0, 0.0, 0.0, 0.0]);
        assert_eq!(freq_wd_1d_value(&u, &v).unwrap(), 1.0);
        assert_eq!(freq_wd_1d_value(&u, &u).unwrap(), 0.0);
        assert!(freq_wd_1d_value(&u, &RealTensor::from_slice(&[1.0, 2.0])).is_err());
        let batch = RealTensor::zeros(&[2, 4]);
        assert!(freq_wd_1d_value(&batch, &batch).is_err());
    }

    #[test]
    fn spatial_swd_ignores_permutation() {
        let u = image(2, 4, 4, 5);
        // Reverse the spatial order of both channels jointly.
        let mut data = Vec::new();
        for ch in 0..2 {
            let plane = &u.data()[ch * 16..(ch + 1) * 16];
            data.extend(plane.iter().rev());
        }
        let v = RealTensor::new(vec![2, 4, 4], data).unwrap();
        assert!(spatial_swd_value(&u, &v, &cfg(1.0), 0).unwrap() < 1e-12);
        assert!(mse_value(&u, &v).unwrap() > 1e-3);
    }

    #[test]
    fn layer_weight_count_must_match() {
        let u = image(1, 8, 8, 6);
        let mut c = cfg(1.0);
        c.layer_weights = Some(vec![1.0, 2.0]);
        assert!(fdl_value(&u, &u, &c, 0).is_err());
        c.layer_weights = Some(vec![2.0]);
        let v = image(1, 8, 8, 7);
        let doubled = fdl_value(&u, &v, &c, 0).unwrap();
        let single = fdl_value(&u, &v, &cfg(1.0), 0).unwrap();
        assert!((doubled - 2.0 * single).abs() < 1e-12);
    }

    #[test]
    fn cached_target_matches_direct_evaluation() {
        let u = image(1, 16, 16, 8);
        let v = image(1, 16, 16, 9);
        let mut c = cfg(1.0);
        c.extractor = ExtractorSpec::Pyramid(PyramidSpec {
            channels: vec![4, 4, 8],
            ..PyramidSpec::default()
        });
        let target = TargetFeatures::prepare(&v, &c.extractor).unwrap();
        let mut tape = Tape::new();
        let uv = tape.constant(u.clone());
        let cached = target.fdl(&mut tape, uv, &c, 4).unwrap();
        let content = target.content(&mut tape, uv, &c, 4).unwrap();
        assert_eq!(scalar(&tape, cached), fdl_value(&u, &v, &c, 4).unwrap());
        assert_eq!(scalar(&tape, content), content_loss_value(&u, &v, &c, 4).unwrap());
    }

    #[test]
    fn external_extractor_needs_stacks() {
        let u = image(1, 8, 8, 0);
        let mut c = cfg(1.0);
        c.extractor = ExtractorSpec::External(vec!["a.ftns".into()]);
        assert!(fdl_value(&u, &u, &c, 0).is_err());
        assert!(TargetFeatures::prepare(&u, &c.extractor).is_err());
        let stack = FeatureStack::uniform(vec![u.clone()]).unwrap();
        let other = FeatureStack::uniform(vec![image(1, 8, 8, 1)]).unwrap();
        assert_eq!(fdl_stacks(&stack, &stack, &c, 0).unwrap(), 0.0);
        c.extractor = ExtractorSpec::Identity;
        let direct = fdl_value(&u, &other.layers()[0], &c, 0).unwrap();
        assert_eq!(fdl_stacks(&stack, &other, &c, 0).unwrap(), direct);
    }

    #[test]
    fn invalid_config_rejected() {
        let u = image(1, 8, 8, 0);
        let mut c = cfg(-1.0);
        assert!(fdl_value(&u, &u, &c, 0).is_err());
        c.lambda = 1.0;
        c.projections = 0;
        assert!(fdl_value(&u, &u, &c, 0).is_err());
    }
}
