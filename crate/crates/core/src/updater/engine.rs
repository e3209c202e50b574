use serde::{Deserialize, Serialize};

use crate::config::{EngineConfig, UPSAMPLE_FACTOR};
use crate::correlation::{build_correlation, build_pyramid, LookupPlan};
use crate::dataio::WeightBundle;
use crate::depth::DepthEstimate;
use crate::encoders::{encode_context, encode_matching, patch_features, ContextSet, FeaturePair};
use crate::error::{shape_err, Error, Result};
use crate::model::{validate_bundle, Block};
use crate::tensor::Tensor;

use super::init::init_disparity;
use super::oracle::{greedy_delta_step, greedy_scale_step};
use super::step::{advance_block, finish_delta, finish_scale, DisparityState, Phase};
use super::upsample::{convex_upsample, upsample_nearest};

/// How updates are predicted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// CNN features and ConvGRU heads from the weight bundle.
    Learned,
    /// Patch-descriptor features and greedy argmax updates; no weights used.
    Oracle,
}

/// What one iteration predicted.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub iteration: usize,
    pub phase: Phase,
    /// Scale map (scale phase) or delta map (delta phase), before flooring.
    pub update: Tensor,
}

#[derive(Clone, Debug)]
pub struct InferenceOutput {
    /// Depth-initialized quarter-resolution disparity.
    pub initial: Tensor,
    /// Quarter-resolution disparity after every iteration.
    pub quarter_res: Vec<Tensor>,
    /// Full-resolution disparity after every iteration.
    pub full_res: Vec<Tensor>,
    pub steps: Vec<StepRecord>,
}

impl InferenceOutput {
    pub fn final_full_res(&self) -> Option<&Tensor> {
        self.full_res.last()
    }
}

/// Engine bound to one configuration and weight bundle.
pub struct Engine<'w> {
    cfg: EngineConfig,
    weights: &'w WeightBundle,
}

impl<'w> Engine<'w> {
    /// Validates the configuration. The bundle is checked against the layer
    /// catalogue lazily, on the first learned run.
    pub fn new(cfg: EngineConfig, weights: &'w WeightBundle) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, weights })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    /// Full pipeline from a rectified image pair.
    pub fn run(&self, left: &Tensor, right: &Tensor, depth: &DepthEstimate, mode: Mode) -> Result<InferenceOutput> {
        match mode {
            Mode::Learned => {
                validate_bundle(self.weights, &self.cfg)?;
                let (pair, ctx) = rayon::join(
                    || encode_matching(left, right, self.weights, &self.cfg),
                    || encode_context(left, self.weights, &self.cfg),
                );
                self.iterate(&pair?, Some(&ctx?), depth, mode)
            }
            Mode::Oracle => self.iterate(&patch_features(left, right)?, None, depth, mode),
        }
    }

    /// Recurrent loop from precomputed features. `context` is required in
    /// learned mode and ignored in oracle mode.
    pub fn iterate(
        &self,
        pair: &FeaturePair,
        context: Option<&ContextSet>,
        depth: &DepthEstimate,
        mode: Mode,
    ) -> Result<InferenceOutput> {
        let cfg = &self.cfg;
        let (_, h, w) = pair.dims();
        if depth.z.dims2()? != (h, w) {
            return shape_err(format!(
                "depth {:?} does not match the {h}x{w} feature grid",
                depth.z.shape()
            ));
        }
        let context = match mode {
            Mode::Learned => {
                Some(context.ok_or_else(|| Error::InvalidArgument("learned mode needs context features".into()))?)
            }
            Mode::Oracle => None,
        };

        let c1 = build_correlation(pair)?;
        let pyr = build_pyramid(c1, cfg.lookup.num_levels)?;
        let plan = LookupPlan::new(&cfg.lookup, (h, w))?;
        let mut sl_buf = Tensor::zeros(&[h, w, plan.scale_width()]);
        let mut pl_buf = Tensor::zeros(&[h, w, plan.pyramid_width()]);

        let initial = init_disparity(depth, w, cfg.eta, cfg.eps);
        let mut state = DisparityState::new(initial.clone(), context, cfg.su_iters);
        let mut out = InferenceOutput {
            initial,
            quarter_res: Vec::with_capacity(cfg.total_iters),
            full_res: Vec::with_capacity(cfg.total_iters),
            steps: Vec::with_capacity(cfg.total_iters),
        };

        for iteration in 0..cfg.total_iters {
            let phase = state.phase;
            let (next, update, full) = match (mode, phase) {
                (Mode::Oracle, Phase::Scale) => {
                    let (next, s) = greedy_scale_step(&state, pyr.finest(), cfg)?;
                    let full = upsample_nearest(&next.d)?;
                    (next, s, full)
                }
                (Mode::Oracle, Phase::Delta) => {
                    let (next, dd) = greedy_delta_step(&state, &pyr, cfg)?;
                    let full = upsample_nearest(&next.d)?;
                    (next, dd, full)
                }
                (Mode::Learned, Phase::Scale) => {
                    let ctx = context.expect("checked above");
                    plan.scale_lookup_into(pyr.finest(), &state.d, &mut sl_buf)?;
                    let (hidden, raw, mask) = advance_block(Block::Scale, &state, &sl_buf, ctx, self.weights)?;
                    let o = finish_scale(&state, hidden, raw, mask, cfg)?;
                    let full = convex_upsample(&o.state.d, &o.mask_logits)?;
                    (o.state, o.update, full)
                }
                (Mode::Learned, Phase::Delta) => {
                    let ctx = context.expect("checked above");
                    plan.pyramid_lookup_into(&pyr, &state.d, &mut pl_buf)?;
                    let (hidden, raw, mask) = advance_block(Block::Delta, &state, &pl_buf, ctx, self.weights)?;
                    let o = finish_delta(&state, hidden, raw, mask, cfg)?;
                    let full = convex_upsample(&o.state.d, &o.mask_logits)?;
                    (o.state, o.update, full)
                }
            };
            debug_assert_eq!(full.shape(), [h * UPSAMPLE_FACTOR, w * UPSAMPLE_FACTOR]);
            out.steps.push(StepRecord {
                iteration,
                phase,
                update,
            });
            out.quarter_res.push(next.d.clone());
            out.full_res.push(full);
            state = next;
        }
        Ok(out)
    }
}

/// Encodes the pair, builds the correlation pyramid, initializes from
/// `depth`, runs `su_iters` scale updates then delta updates up to
/// `total_iters`, and returns every iteration's disparity.
pub fn run_inference(
    left: &Tensor,
    right: &Tensor,
    depth: &DepthEstimate,
    weights: &WeightBundle,
    cfg: &EngineConfig,
    mode: Mode,
) -> Result<InferenceOutput> {
    Engine::new(cfg.clone(), weights)?.run(left, right, depth, mode)
}
