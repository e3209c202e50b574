//! Lookups driven by a precomputed sampling plan.
//!
//! The direct path rebuilds an index tensor for every call. A
//! [`LookupPlan`] fixes the per-level offset grid and the per-factor
//! neighbour triplets once per map shape and then writes samples straight
//! into a caller-owned buffer. The positions are formed with the same
//! floating-point expressions as the direct path, so the results are
//! bit-identical.

use crate::config::LookupConfig;
use crate::error::{shape_err, Result};
use crate::tensor::{sample_row, Tensor};

use super::lookup::check_disparity;
use super::CorrelationPyramid;

#[derive(Clone, Debug)]
pub struct LookupPlan {
    height: usize,
    width: usize,
    /// Column coordinate of every pixel, as sampled.
    columns: Vec<f64>,
    /// `1 / 2^l` per pyramid level.
    level_scales: Vec<f64>,
    /// Offsets `−r..=r`.
    offsets: Vec<f64>,
    factors: Vec<f64>,
    /// Neighbour shifts `δ` of the scale lookup triplets.
    deltas: [f64; 3],
}

/// Builds the static sampling structure for maps of shape `(h, w)`.
pub fn precompute_lookup_indexes(cfg: &LookupConfig, shape: (usize, usize)) -> Result<LookupPlan> {
    LookupPlan::new(cfg, shape)
}

impl LookupPlan {
    pub fn new(cfg: &LookupConfig, (height, width): (usize, usize)) -> Result<Self> {
        cfg.validate()?;
        let r = cfg.radius as isize;
        Ok(Self {
            height,
            width,
            columns: (0..width).map(|j| j as f64).collect(),
            level_scales: (0..cfg.num_levels).map(|l| 1.0 / (1u64 << l) as f64).collect(),
            offsets: (-r..=r).map(|o| o as f64).collect(),
            factors: cfg.scale_factors.clone(),
            deltas: [-1.0, 0.0, 1.0],
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pyramid_width(&self) -> usize {
        self.level_scales.len() * self.offsets.len()
    }

    pub fn scale_width(&self) -> usize {
        3 * self.factors.len()
    }

    fn check(&self, volume: &Tensor, d: &Tensor, out: &Tensor, k: usize) -> Result<()> {
        let (h, w) = check_disparity(volume, d)?;
        if (h, w) != (self.height, self.width) {
            return shape_err(format!("plan built for {}x{}, map is {h}x{w}", self.height, self.width));
        }
        if out.shape() != [h, w, k] {
            return shape_err(format!("output buffer {:?}, need [{h}, {w}, {k}]", out.shape()));
        }
        Ok(())
    }

    /// Pyramid lookup into a preallocated `h × w × K` buffer. Allocation-free.
    pub fn pyramid_lookup_into(&self, pyr: &CorrelationPyramid, d: &Tensor, out: &mut Tensor) -> Result<()> {
        let k = self.pyramid_width();
        self.check(pyr.finest(), d, out, k)?;
        if pyr.num_levels() < self.level_scales.len() {
            return shape_err("pyramid has fewer levels than the plan");
        }
        let taps = self.offsets.len();
        let dd = d.data();
        let dst = out.data_mut();
        for (l, &inv) in self.level_scales.iter().enumerate() {
            let vol = &pyr.levels()[l];
            let wl = vol.shape()[2];
            let vdata = vol.data();
            for p in 0..self.height * self.width {
                let row = &vdata[p * wl..(p + 1) * wl];
                let centre = (self.columns[p % self.width] - dd[p]) * inv;
                let base = p * k + l * taps;
                for (t, &o) in self.offsets.iter().enumerate() {
                    dst[base + t] = sample_row(row, centre + o);
                }
            }
        }
        Ok(())
    }

    /// Scale lookup into a preallocated `h × w × 3M` buffer. Allocation-free.
    pub fn scale_lookup_into(&self, c1: &Tensor, d: &Tensor, out: &mut Tensor) -> Result<()> {
        let k = self.scale_width();
        self.check(c1, d, out, k)?;
        let wl = c1.shape()[2];
        let vdata = c1.data();
        let dd = d.data();
        let dst = out.data_mut();
        for p in 0..self.height * self.width {
            let row = &vdata[p * wl..(p + 1) * wl];
            let col = self.columns[p % self.width];
            let dv = dd[p];
            for (m, &s) in self.factors.iter().enumerate() {
                for (t, &delta) in self.deltas.iter().enumerate() {
                    dst[p * k + 3 * m + t] = sample_row(row, col - (s * dv + delta));
                }
            }
        }
        Ok(())
    }

    pub fn pyramid_lookup(&self, pyr: &CorrelationPyramid, d: &Tensor) -> Result<Tensor> {
        let mut out = Tensor::zeros(&[self.height, self.width, self.pyramid_width()]);
        self.pyramid_lookup_into(pyr, d, &mut out)?;
        Ok(out)
    }

    pub fn scale_lookup(&self, c1: &Tensor, d: &Tensor) -> Result<Tensor> {
        let mut out = Tensor::zeros(&[self.height, self.width, self.scale_width()]);
        self.scale_lookup_into(c1, d, &mut out)?;
        Ok(out)
    }

    /// Every position the pyramid lookup reads for a pixel at column `j`
    /// with disparity `d`, as `(level, position)` pairs.
    pub fn pyramid_positions(&self, j: usize, d: f64) -> Vec<(usize, f64)> {
        let mut v = Vec::with_capacity(self.pyramid_width());
        for (l, &inv) in self.level_scales.iter().enumerate() {
            let centre = (j as f64 - d) * inv;
            v.extend(self.offsets.iter().map(|&o| (l, centre + o)));
        }
        v
    }

    /// Every first-level position the scale lookup reads for column `j`.
    pub fn scale_positions(&self, j: usize, d: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.scale_width());
        for &s in &self.factors {
            v.extend(self.deltas.iter().map(|&delta| j as f64 - (s * d + delta)));
        }
        v
    }
}
