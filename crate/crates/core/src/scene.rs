//! Synthetic rectified stereo pairs with exact ground truth.
//!
//! A scene is a stack of fronto-parallel textured rectangles over a
//! full-frame background. Each layer has an integer disparity; layers with
//! larger disparity are nearer and painted later. The right view shows each
//! layer shifted left by its disparity, so on every valid pixel
//! `left[y, x] == right[y, x − d(y, x)]` holds exactly.

use serde::{Deserialize, Serialize};

use crate::config::UPSAMPLE_FACTOR;
use crate::depth::Rect;
use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Footprint in the left image, full-resolution pixels.
    pub rect: Rect,
    pub disparity: u32,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub background_disparity: u32,
    pub background_seed: u64,
    pub layers: Vec<Layer>,
}

impl SceneSpec {
    /// Background on the left, a foreground plane covering columns
    /// `[split, width)` over the full height.
    pub fn two_plane(height: usize, width: usize, split: usize, background: u32, foreground: u32, seed: u64) -> Self {
        Self {
            height,
            width,
            background_disparity: background,
            background_seed: seed,
            layers: vec![Layer {
                rect: Rect::new(0, split, height, width),
                disparity: foreground,
                seed: seed.wrapping_add(1),
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::InvalidArgument("scene must be non-empty".into()));
        }
        let cap = (self.width / UPSAMPLE_FACTOR) as u32;
        if self.background_disparity > cap {
            return Err(Error::InvalidArgument(format!(
                "background disparity {} exceeds the cap {cap}",
                self.background_disparity
            )));
        }
        for (n, l) in self.layers.iter().enumerate() {
            let r = l.rect;
            if r.y1 > self.height || r.x1 > self.width || r.y0 >= r.y1 || r.x0 >= r.x1 {
                return Err(Error::InvalidArgument(format!(
                    "layer {n} rectangle {r:?} is empty or outside the {}x{} image",
                    self.height, self.width
                )));
            }
            if l.disparity > cap {
                return Err(Error::InvalidArgument(format!(
                    "layer {n} disparity {} exceeds the cap {cap}",
                    l.disparity
                )));
            }
        }
        Ok(())
    }
}

/// Generated pair and full-resolution ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub left: Tensor,
    pub right: Tensor,
    pub disparity: Tensor,
    pub valid: Mask,
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d4_9bb1_3311_eb9b);
    z ^ (z >> 31)
}

/// Per-pixel uniform 8-bit color, a pure function of `(seed, x, y, channel)`.
fn texel(seed: u64, x: usize, y: usize, c: usize) -> f64 {
    let h = mix(seed ^ mix((x as u64) << 32 | (y as u64) << 2 | c as u64));
    (h % 256) as f64 / 255.0
}

pub fn synth_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);

    // Paint order: background, then layers by ascending disparity.
    let mut order: Vec<usize> = (0..spec.layers.len()).collect();
    order.sort_by_key(|&n| spec.layers[n].disparity);
    let layer_disp = |owner: usize| -> usize {
        if owner == 0 {
            spec.background_disparity as usize
        } else {
            spec.layers[owner - 1].disparity as usize
        }
    };
    let layer_seed = |owner: usize| -> u64 {
        if owner == 0 {
            spec.background_seed
        } else {
            spec.layers[owner - 1].seed
        }
    };

    // Owner 0 is the background, owner n + 1 is layer n.
    let mut left_owner = vec![0usize; h * w];
    let mut right_owner = vec![0usize; h * w];
    for &n in &order {
        let l = &spec.layers[n];
        let d = l.disparity as usize;
        for y in l.rect.y0..l.rect.y1 {
            for x in l.rect.x0..l.rect.x1 {
                left_owner[y * w + x] = n + 1;
                if x >= d {
                    right_owner[y * w + x - d] = n + 1;
                }
            }
        }
    }

    let mut left = Tensor::zeros(&[3, h, w]);
    let mut right = Tensor::zeros(&[3, h, w]);
    let mut disparity = Tensor::zeros(&[h, w]);
    let mut valid = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let lo = left_owner[y * w + x];
            let ro = right_owner[y * w + x];
            let ld = layer_disp(lo);
            // Right pixel x shows its owner's texture at left coordinate x + d.
            let rx = x + layer_disp(ro);
            for c in 0..3 {
                left.set3(c, y, x, texel(layer_seed(lo), x, y, c));
                right.set3(c, y, x, texel(layer_seed(ro), rx, y, c));
            }
            disparity.set2(y, x, ld as f64);
            valid[y * w + x] = x >= ld && right_owner[y * w + x - ld] == lo;
        }
    }
    Ok(Scene {
        left,
        right,
        disparity,
        valid: Mask::new(h, w, valid)?,
    })
}

/// Quarter-resolution ground truth: each 4×4 block's disparity divided by 4,
/// valid only when all 16 pixels are valid and share one disparity.
pub fn quarter_res_truth(disparity: &Tensor, valid: &Mask) -> Result<(Tensor, Mask)> {
    let (h, w) = disparity.dims2()?;
    valid.check_matches(disparity)?;
    let f = UPSAMPLE_FACTOR;
    if h % f != 0 || w % f != 0 {
        return Err(Error::Shape(format!("{h}x{w} is not divisible by {f}")));
    }
    let (qh, qw) = (h / f, w / f);
    let mut ok = vec![false; qh * qw];
    let d = Tensor::from_fn2(qh, qw, |i, j| {
        let first = disparity.at2(i * f, j * f);
        let mut uniform = true;
        for dy in 0..f {
            for dx in 0..f {
                let (y, x) = (i * f + dy, j * f + dx);
                uniform &= valid.get(y, x) && disparity.at2(y, x) == first;
            }
        }
        ok[i * qw + j] = uniform;
        first / f as f64
    });
    Ok((d, Mask::new(qh, qw, ok)?))
}
