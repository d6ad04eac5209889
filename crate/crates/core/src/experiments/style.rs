//! Style transfer by direct optimization of the output pixels.

use crate::error::{Error, Result};
use crate::losses::{FdlConfig, RecordedSamples, TargetFeatures};
use crate::numerics::{adam_step, Adam, AdamState, RealTensor, Tape, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct StyleOptions {
    /// Content weight.
    pub alpha: f64,
    /// Style weight.
    pub beta: f64,
    pub steps: usize,
    pub lr: f64,
}

impl Default for StyleOptions {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            steps: 300,
            lr: 0.02,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub content: f64,
    pub style: f64,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StyleResult {
    pub image: RealTensor,
    /// Losses at each step, evaluated before that step's update. A term with
    /// weight 0 is not evaluated during the steps and shows as NaN.
    pub trace: Vec<TraceRow>,
    /// Objective of the content image and of the result, both evaluated with
    /// the projection banks of `eval_id = steps` so they are comparable.
    pub initial: TraceRow,
    pub final_: TraceRow,
}

struct Objective<'a> {
    content: TargetFeatures,
    style: TargetFeatures,
    cfg: &'a FdlConfig,
    opts: &'a StyleOptions,
}

impl Objective<'_> {
    /// Records the weighted objective. A term whose weight is 0 is left off
    /// the tape and reported as NaN.
    fn record(&self, tape: &mut Tape, r: Var, eval_id: u64, skip_unweighted: bool) -> Result<(Var, TraceRow)> {
        let samples = RecordedSamples::record(tape, r, self.cfg)?;
        let mut terms = Vec::with_capacity(2);
        let mut values = [f64::NAN; 2];
        for (i, weight) in [self.opts.alpha, self.opts.beta].into_iter().enumerate() {
            if skip_unweighted && weight == 0.0 {
                continue;
            }
            let term = if i == 0 {
                self.content.content_recorded(tape, &samples, self.cfg, eval_id)?
            } else {
                self.style.fdl_recorded(tape, &samples, self.cfg, eval_id)?
            };
            values[i] = tape.value(term).item().expect("scalar loss");
            terms.push((term, weight));
        }
        let total = tape.weighted_sum(&terms)?;
        let row = TraceRow {
            step: eval_id as usize,
            content: values[0],
            style: values[1],
            objective: tape.value(total).item().expect("scalar loss"),
        };
        Ok((total, row))
    }

    fn measure(&self, image: &RealTensor, eval_id: u64) -> Result<TraceRow> {
        let mut tape = Tape::new();
        let r = tape.constant(image.clone());
        Ok(self.record(&mut tape, r, eval_id, false)?.1)
    }
}

/// Optimizes `R`, initialized to `content`, to minimize
/// `α·content_loss(R, content) + β·style_loss(R, style)` with Adam, clipping
/// `R` to `[0, 1]` after every step. Step `t` uses `eval_id = t`.
pub fn style_transfer(content: &RealTensor, style: &RealTensor, cfg: &FdlConfig, opts: &StyleOptions) -> Result<StyleResult> {
    content.ensure_same_shape(style, "style_transfer")?;
    if !(opts.alpha >= 0.0 && opts.beta >= 0.0 && opts.alpha.is_finite() && opts.beta.is_finite()) {
        return Err(Error::InvalidArgument("alpha and beta must be finite and ≥ 0".into()));
    }
    if opts.alpha == 0.0 && opts.beta == 0.0 {
        return Err(Error::InvalidArgument("alpha and beta cannot both be 0".into()));
    }
    cfg.validate()?;
    let objective = Objective {
        content: TargetFeatures::prepare(content, &cfg.extractor)?,
        style: TargetFeatures::prepare(style, &cfg.extractor)?,
        cfg,
        opts,
    };

    let mut params = vec![content.clone()];
    let mut state = AdamState::new(Adam::with_lr(opts.lr), &params);
    let mut trace = Vec::with_capacity(opts.steps);
    for step in 0..opts.steps {
        let mut tape = Tape::new();
        let r = tape.param(params[0].clone());
        let (total, row) = objective.record(&mut tape, r, step as u64, true)?;
        if !row.objective.is_finite() {
            return Err(Error::NonFinite(format!("style objective diverged at step {step}: {}", row.objective)));
        }
        trace.push(row);
        let grad = tape.backward(total)?.wrt(&tape, r);
        adam_step(&mut params, &[grad], &mut state)?;
        params[0].data_mut().iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    }

    let image = params.pop().expect("one parameter");
    let held_out = opts.steps as u64;
    Ok(StyleResult {
        initial: objective.measure(content, held_out)?,
        final_: objective.measure(&image, held_out)?,
        image,
        trace,
    })
}
