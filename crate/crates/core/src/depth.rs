//! Relative inverse-depth inputs: synthetic perturbations of ground truth and
//! externally produced maps.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::UPSAMPLE_FACTOR;
use crate::dataio::read_disparity;
use crate::error::{shape_err, Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    SyntheticPerturbed,
    ExternalFile,
    /// No depth was supplied; the map is all zeros and initialization falls
    /// back to the constant floor.
    Absent,
}

/// Quarter-resolution, nonnegative, affine-ambiguous inverse depth.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthEstimate {
    pub z: Tensor,
    pub provenance: Provenance,
}

impl DepthEstimate {
    pub fn new(z: Tensor, provenance: Provenance) -> Result<Self> {
        z.dims2()?;
        if z.data().iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "depth values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { z, provenance })
    }
}

/// Half-open pixel rectangle `[y0, y1) × [x0, x1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub y0: usize,
    pub x0: usize,
    pub y1: usize,
    pub x1: usize,
}

impl Rect {
    pub fn new(y0: usize, x0: usize, y1: usize, x1: usize) -> Self {
        Self { y0, x0, y1, x1 }
    }

    pub fn contains(&self, y: usize, x: usize) -> bool {
        (self.y0..self.y1).contains(&y) && (self.x0..self.x1).contains(&x)
    }

    pub fn area(&self) -> usize {
        self.y1.saturating_sub(self.y0) * self.x1.saturating_sub(self.x0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub rect: Rect,
    pub scale: f64,
}

/// Region-wise scale distortion applied to ground-truth disparity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub regions: Vec<Region>,
    pub shift: f64,
    pub normalization: f64,
}

impl PerturbSpec {
    /// A single region covering an `h × w` map.
    pub fn uniform(h: usize, w: usize, scale: f64) -> Self {
        Self {
            regions: vec![Region {
                rect: Rect::new(0, 0, h, w),
                scale,
            }],
            shift: 0.0,
            normalization: 1.0,
        }
    }

    /// Left and right halves of an `h × w` map with separate scales.
    pub fn split_columns(h: usize, w: usize, split: usize, left: f64, right: f64) -> Self {
        Self {
            regions: vec![
                Region {
                    rect: Rect::new(0, 0, h, split),
                    scale: left,
                },
                Region {
                    rect: Rect::new(0, split, h, w),
                    scale: right,
                },
            ],
            shift: 0.0,
            normalization: 1.0,
        }
    }

    /// Index of the region owning each pixel; errors unless the regions
    /// tile the map exactly and all parameters are in range.
    pub fn assignment(&self, h: usize, w: usize) -> Result<Vec<usize>> {
        if !(self.normalization > 0.0 && self.normalization.is_finite()) {
            return Err(Error::InvalidArgument("normalization must be positive".into()));
        }
        if !self.shift.is_finite() {
            return Err(Error::InvalidArgument("shift must be finite".into()));
        }
        let mut owner = vec![usize::MAX; h * w];
        for (n, reg) in self.regions.iter().enumerate() {
            if !(reg.scale > 0.0 && reg.scale.is_finite()) {
                return Err(Error::InvalidArgument(format!("region {n} has non-positive scale")));
            }
            if reg.rect.y1 > h || reg.rect.x1 > w {
                return Err(Error::InvalidArgument(format!("region {n} exceeds the {h}x{w} map")));
            }
            for y in reg.rect.y0..reg.rect.y1 {
                for x in reg.rect.x0..reg.rect.x1 {
                    let slot = &mut owner[y * w + x];
                    if *slot != usize::MAX {
                        return Err(Error::InvalidArgument(format!(
                            "regions {} and {n} overlap at ({y}, {x})",
                            *slot
                        )));
                    }
                    *slot = n;
                }
            }
        }
        if let Some(p) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::InvalidArgument(format!(
                "pixel ({}, {}) is not covered by any region",
                p / w,
                p % w
            )));
        }
        Ok(owner)
    }
}

/// `z = max(0, (scale(region)·d + shift)·normalization)`.
pub fn perturb_depth(d_gt: &Tensor, spec: &PerturbSpec) -> Result<DepthEstimate> {
    let (h, w) = d_gt.dims2()?;
    if d_gt.data().iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "ground truth must be finite and nonnegative".into(),
        ));
    }
    let owner = spec.assignment(h, w)?;
    let data: Vec<f64> = d_gt
        .data()
        .iter()
        .zip(&owner)
        .map(|(&d, &o)| ((spec.regions[o].scale * d + spec.shift) * spec.normalization).max(0.0))
        .collect();
    if data.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument("perturbed depth is identically zero".into()));
    }
    DepthEstimate::new(Tensor::new(vec![h, w], data)?, Provenance::SyntheticPerturbed)
}

/// Mean over non-overlapping `f × f` blocks.
pub fn block_mean(map: &Tensor, f: usize) -> Result<Tensor> {
    let (h, w) = map.dims2()?;
    if f == 0 || h % f != 0 || w % f != 0 {
        return shape_err(format!("{h}x{w} is not divisible into {f}x{f} blocks"));
    }
    let n = (f * f) as f64;
    Ok(Tensor::from_fn2(h / f, w / f, |i, j| {
        let mut acc = 0.0;
        for dy in 0..f {
            for dx in 0..f {
                acc += map.at2(i * f + dy, j * f + dx);
            }
        }
        acc / n
    }))
}

/// Decodes a PFM or 16-bit PNG depth map for an image of `full` = `(H, W)`
/// pixels. Full-resolution maps are reduced to quarter resolution by block
/// means; invalid pixels read as zero.
pub fn load_external_depth(bytes: &[u8], full: (usize, usize)) -> Result<DepthEstimate> {
    let (map, mask) = read_disparity(bytes)?;
    let (h, w) = map.dims2()?;
    let f = UPSAMPLE_FACTOR;
    let cleaned = Tensor::from_fn2(h, w, |i, j| if mask.get(i, j) { map.at2(i, j) } else { 0.0 });
    if cleaned.data().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("depth map contains negative values".into()));
    }
    let z = if (h, w) == full {
        block_mean(&cleaned, f)?
    } else if (h * f, w * f) == full {
        cleaned
    } else {
        return shape_err(format!(
            "depth map is {h}x{w}; expected {}x{} or {}x{}",
            full.0,
            full.1,
            full.0 / f,
            full.1 / f
        ));
    };
    DepthEstimate::new(z, Provenance::ExternalFile)
}

/// All-zero stand-in used when no depth map is available.
pub fn absent_depth(h: usize, w: usize) -> DepthEstimate {
    DepthEstimate {
        z: Tensor::zeros(&[h, w]),
        provenance: Provenance::Absent,
    }
}

pub fn load_external_depth_file(path: &Path, full: (usize, usize)) -> Result<DepthEstimate> {
    let bytes = std::fs::read(path)?;
    load_external_depth(&bytes, full)
}
