use std::f64::consts::LN_2;

use crate::config::EngineConfig;
use crate::correlation::{pyramid_lookup, scale_lookup, CorrelationPyramid};
use crate::dataio::WeightBundle;
use crate::encoders::ContextSet;
use crate::error::{shape_err, Error, Result};
use crate::model::{apply_conv, Block};
use crate::tensor::{downsample2x_avg, relu, upsample2x_bilinear, Tensor};

use super::gru::{gru_step, GruParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Scale,
    Delta,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Scale => "scale-update",
            Phase::Delta => "delta-update",
        }
    }
}

/// Quarter-resolution disparity plus the hidden states at 1/4, 1/8, 1/16.
#[derive(Clone, Debug, PartialEq)]
pub struct DisparityState {
    pub d: Tensor,
    pub hidden: Vec<Tensor>,
    pub iteration: usize,
    pub phase: Phase,
}

impl DisparityState {
    /// Fresh state from an initial disparity and the context's hidden inits.
    pub fn new(d0: Tensor, context: Option<&ContextSet>, su_iters: usize) -> Self {
        let hidden = context
            .map(|c| c.levels.iter().map(|l| l.hidden_init.clone()).collect())
            .unwrap_or_default();
        Self {
            d: d0,
            hidden,
            iteration: 0,
            phase: if su_iters > 0 { Phase::Scale } else { Phase::Delta },
        }
    }

    pub(crate) fn expect_phase(&self, phase: Phase) -> Result<()> {
        if self.phase != phase {
            return Err(Error::Phase {
                expected: phase.name(),
                actual: self.phase.name(),
            });
        }
        Ok(())
    }

    /// Moves to the next iteration, entering the delta phase after `su_iters` steps.
    pub(crate) fn advanced(mut self, d: Tensor, su_iters: usize) -> Self {
        self.d = d;
        self.iteration += 1;
        self.phase = if self.iteration < su_iters {
            Phase::Scale
        } else {
            Phase::Delta
        };
        self
    }
}

/// Result of one learned update.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: DisparityState,
    /// Predicted scale map `s` (scale phase) or delta map `Δd` (delta phase),
    /// before the `eps` floor is applied to the disparity.
    pub update: Tensor,
    /// Convex-upsampling logits predicted from the new 1/4 hidden state.
    pub mask_logits: Tensor,
}

/// `h × w × K` lookup samples to a `K × h × w` channel stack.
pub(crate) fn lookup_to_channels(samples: &Tensor) -> Result<Tensor> {
    let (h, w, k) = samples.dims3()?;
    Ok(Tensor::from_fn3(k, h, w, |c, i, j| samples.at3(i, j, c)))
}

/// Runs the three-level GRU of `block` and returns the new hidden states and
/// the block head's raw output (`1 × h × w`) and mask logits.
pub(crate) fn advance_block(
    block: Block,
    state: &DisparityState,
    lookup: &Tensor,
    context: &ContextSet,
    weights: &WeightBundle,
) -> Result<(Vec<Tensor>, Tensor, Tensor)> {
    let p = block.prefix();
    if state.hidden.len() != 3 || context.levels.len() != 3 {
        return shape_err("learned updates need hidden state and context at three levels");
    }
    let (h, w) = state.d.dims2()?;
    if state.hidden[0].shape()[1..] != [h, w] {
        return shape_err(format!("hidden {:?} vs disparity {h}x{w}", state.hidden[0].shape()));
    }
    let gru = |level: usize, x: &Tensor| -> Result<Tensor> {
        let params = GruParams::from_bundle(weights, &format!("{p}.gru{level}"))?;
        let ctx = &context.levels[level];
        gru_step(
            &state.hidden[level],
            (&ctx.gate_z, &ctx.gate_r, &ctx.gate_h),
            x,
            &params,
        )
    };

    let h2 = gru(2, &downsample2x_avg(&state.hidden[1])?)?;
    let x1 = Tensor::concat_channels(&[&downsample2x_avg(&state.hidden[0])?, &upsample2x_bilinear(&h2)?])?;
    let h1 = gru(1, &x1)?;

    let corr = relu(&apply_conv(
        weights,
        &format!("{p}.enc_corr"),
        &lookup_to_channels(lookup)?,
        1,
    )?);
    let disp_in = state.d.clone().reshape(vec![1, h, w])?;
    let disp = relu(&apply_conv(weights, &format!("{p}.enc_disp"), &disp_in, 1)?);
    let x0 = Tensor::concat_channels(&[&corr, &disp, &upsample2x_bilinear(&h1)?])?;
    let h0 = gru(0, &x0)?;

    let hid = relu(&apply_conv(weights, &format!("{p}.head.conv1"), &h0, 1)?);
    let raw = apply_conv(weights, &format!("{p}.head.conv2"), &hid, 1)?;
    let mask = apply_conv(weights, &format!("{p}.mask"), &h0, 1)?;
    Ok((vec![h0, h1, h2], raw.reshape(vec![h, w])?, mask))
}

/// `s = exp(tanh(raw) · ln 2)`, bounded in (1/2, 2).
pub(crate) fn scale_from_raw(raw: &Tensor) -> Tensor {
    raw.map(|v| (v.tanh() * LN_2).exp())
}

pub(crate) fn apply_scale(d: &Tensor, s: &Tensor, eps: f64) -> Result<Tensor> {
    d.zip_map(s, |dv, sv| (sv * dv).max(eps))
}

pub(crate) fn apply_delta(d: &Tensor, delta: &Tensor, eps: f64) -> Result<Tensor> {
    d.zip_map(delta, |dv, dd| (dv + dd).max(eps))
}

pub(crate) fn finish_scale(
    state: &DisparityState,
    hidden: Vec<Tensor>,
    raw: Tensor,
    mask_logits: Tensor,
    cfg: &EngineConfig,
) -> Result<StepOutcome> {
    let s = scale_from_raw(&raw);
    let d = apply_scale(&state.d, &s, cfg.eps)?;
    let mut next = state.clone().advanced(d, cfg.su_iters);
    next.hidden = hidden;
    Ok(StepOutcome {
        state: next,
        update: s,
        mask_logits,
    })
}

pub(crate) fn finish_delta(
    state: &DisparityState,
    hidden: Vec<Tensor>,
    delta: Tensor,
    mask_logits: Tensor,
    cfg: &EngineConfig,
) -> Result<StepOutcome> {
    let d = apply_delta(&state.d, &delta, cfg.eps)?;
    let mut next = state.clone().advanced(d, cfg.su_iters);
    next.hidden = hidden;
    Ok(StepOutcome {
        state: next,
        update: delta,
        mask_logits,
    })
}

/// Multiplicative update `d' = max(s ⊙ d, eps)` from scale-lookup features.
pub fn scale_update_step(
    state: &DisparityState,
    c1: &Tensor,
    context: &ContextSet,
    weights: &WeightBundle,
    cfg: &EngineConfig,
) -> Result<StepOutcome> {
    state.expect_phase(Phase::Scale)?;
    let lookup = scale_lookup(c1, &state.d, &cfg.lookup)?;
    let (hidden, raw, mask) = advance_block(Block::Scale, state, &lookup, context, weights)?;
    finish_scale(state, hidden, raw, mask, cfg)
}

/// Additive update `d' = max(d + Δd, eps)` from pyramid-lookup features.
pub fn delta_update_step(
    state: &DisparityState,
    pyr: &CorrelationPyramid,
    context: &ContextSet,
    weights: &WeightBundle,
    cfg: &EngineConfig,
) -> Result<StepOutcome> {
    state.expect_phase(Phase::Delta)?;
    let lookup = pyramid_lookup(pyr, &state.d, &cfg.lookup)?;
    let (hidden, delta, mask) = advance_block(Block::Delta, state, &lookup, context, weights)?;
    finish_delta(state, hidden, delta, mask, cfg)
}
