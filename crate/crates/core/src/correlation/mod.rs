//! All-pairs correlation along rectified scanlines, its pooled pyramid, and
//! the two retrieval schemes built on it.
//!
//! Disparity convention: a left pixel at column `j` with disparity `d`
//! matches right column `j − d`, so every lookup reads the volume's last axis
//! at `j − displacement`.

mod lookup;
mod plan;

use rayon::prelude::*;

use crate::encoders::FeaturePair;
use crate::error::{Error, Result};
use crate::tensor::{avg_pool_last, Tensor};

pub use lookup::{pyramid_lookup, scale_lookup};
pub use plan::{precompute_lookup_indexes, LookupPlan};

/// `C[i, j, k] = Σ_c left[c, i, j] · right[c, i, k]`, shape `h × w × w`.
///
/// Channels are accumulated in ascending order starting from zero, so
/// swapping the two maps transposes the last two axes bit for bit.
pub fn build_correlation(pair: &FeaturePair) -> Result<Tensor> {
    let (c, h, w) = pair.left.dims3()?;
    if pair.right.dims3()? != (c, h, w) {
        return Err(Error::Shape(format!(
            "left {:?} vs right {:?}",
            pair.left.shape(),
            pair.right.shape()
        )));
    }
    let (fl, fr) = (pair.left.data(), pair.right.data());
    let mut out = vec![0.0; h * w * w];
    out.par_chunks_mut(w * w).enumerate().for_each(|(i, slab)| {
        for ch in 0..c {
            let lrow = &fl[(ch * h + i) * w..(ch * h + i + 1) * w];
            let rrow = &fr[(ch * h + i) * w..(ch * h + i + 1) * w];
            for (j, &a) in lrow.iter().enumerate() {
                for (dst, &b) in slab[j * w..(j + 1) * w].iter_mut().zip(rrow) {
                    *dst += a * b;
                }
            }
        }
    });
    Tensor::new(vec![h, w, w], out)
}

/// First-level volume plus successively pooled levels.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationPyramid {
    levels: Vec<Tensor>,
}

impl CorrelationPyramid {
    pub fn levels(&self) -> &[Tensor] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// The unpooled volume.
    pub fn finest(&self) -> &Tensor {
        &self.levels[0]
    }
}

/// Pools `c1` along its last axis `num_levels − 1` times.
pub fn build_pyramid(c1: Tensor, num_levels: usize) -> Result<CorrelationPyramid> {
    let (_, _, w) = c1.dims3()?;
    if num_levels < 1 {
        return Err(Error::InvalidArgument("need at least one pyramid level".into()));
    }
    if w >> (num_levels - 1) < 1 {
        return Err(Error::InvalidArgument(format!(
            "{num_levels} levels would pool a width-{w} axis below one entry"
        )));
    }
    let mut levels = Vec::with_capacity(num_levels);
    levels.push(c1);
    for _ in 1..num_levels {
        let next = avg_pool_last(levels.last().expect("nonempty"))?;
        levels.push(next);
    }
    Ok(CorrelationPyramid { levels })
}
