//! Non-learned updates that stand in for the GRU heads. They pick the
//! candidate with the strongest correlation, which is exactly what a
//! perfectly trained head could do with the same lookup features.

use crate::config::EngineConfig;
use crate::correlation::{pyramid_lookup, scale_lookup, CorrelationPyramid};
use crate::error::Result;
use crate::tensor::Tensor;

use super::step::{apply_delta, apply_scale, DisparityState, Phase};

/// Index of the best candidate; among equal maxima the one with the smallest
/// `rank` wins.
fn pick(values: impl Iterator<Item = f64>, rank: impl Fn(usize) -> f64) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (m, v) in values.enumerate() {
        if v > best_v || (v == best_v && rank(m) < rank(best)) {
            best = m;
            best_v = v;
        }
    }
    best
}

/// Per pixel, multiplies `d` by the scale factor whose scale-lookup centre
/// sample is largest. Ties go to the factor closest to 1, so a pixel without
/// correlation evidence keeps its disparity. Returns the new state and the
/// chosen factor map.
pub fn greedy_scale_step(state: &DisparityState, c1: &Tensor, cfg: &EngineConfig) -> Result<(DisparityState, Tensor)> {
    state.expect_phase(Phase::Scale)?;
    let factors = &cfg.lookup.scale_factors;
    let sl = scale_lookup(c1, &state.d, &cfg.lookup)?;
    let (h, w) = state.d.dims2()?;
    let s = Tensor::from_fn2(h, w, |i, j| {
        let m = pick((0..factors.len()).map(|m| sl.at3(i, j, 3 * m + 1)), |m| {
            factors[m].ln().abs()
        });
        factors[m]
    });
    let d = apply_scale(&state.d, &s, cfg.eps)?;
    Ok((state.clone().advanced(d, cfg.su_iters), s))
}

/// Per pixel, moves `d` to the finest-level pyramid-lookup offset with the
/// largest sample (ties toward zero offset). Returns the new state and `Δd`.
pub fn greedy_delta_step(
    state: &DisparityState,
    pyr: &CorrelationPyramid,
    cfg: &EngineConfig,
) -> Result<(DisparityState, Tensor)> {
    state.expect_phase(Phase::Delta)?;
    let pl = pyramid_lookup(pyr, &state.d, &cfg.lookup)?;
    let r = cfg.lookup.radius;
    let (h, w) = state.d.dims2()?;
    let delta = Tensor::from_fn2(h, w, |i, j| {
        let t = pick((0..2 * r + 1).map(|t| pl.at3(i, j, t)), |t| t.abs_diff(r) as f64);
        // The sample at offset o reads column j − d + o, i.e. disparity d − o.
        r as f64 - t as f64
    });
    let d = apply_delta(&state.d, &delta, cfg.eps)?;
    Ok((state.clone().advanced(d, cfg.su_iters), delta))
}
