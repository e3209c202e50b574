use crate::config::UPSAMPLE_FACTOR;
use crate::error::{shape_err, Result};
use crate::model::MASK_CHANNELS;
use crate::tensor::Tensor;

/// Convex upsampling of a quarter-resolution disparity map.
///
/// `mask_logits` is `144 × h × w`; channel `k·16 + sy·4 + sx` scores
/// neighbour `k` (row-major over the 3×3 window) for sub-pixel `(sy, sx)`.
/// The 9 logits of each sub-pixel are softmax-normalized and the output is
/// `4 · Σ weight · neighbour`, the factor 4 converting to full-resolution
/// pixel units. Borders replicate the edge value, so every output lies
/// within four times the range of its clamped 3×3 window.
pub fn convex_upsample(d: &Tensor, mask_logits: &Tensor) -> Result<Tensor> {
    let (h, w) = d.dims2()?;
    let f = UPSAMPLE_FACTOR;
    let sub = f * f;
    if mask_logits.shape() != [MASK_CHANNELS, h, w] {
        return shape_err(format!(
            "mask logits {:?}, need [{MASK_CHANNELS}, {h}, {w}]",
            mask_logits.shape()
        ));
    }
    let mut out = Tensor::zeros(&[h * f, w * f]);
    let mut neigh = [0.0; 9];
    let mut logits = [0.0; 9];
    for i in 0..h {
        for j in 0..w {
            for (k, slot) in neigh.iter_mut().enumerate() {
                let y = (i as isize + k as isize / 3 - 1).clamp(0, h as isize - 1) as usize;
                let x = (j as isize + k as isize % 3 - 1).clamp(0, w as isize - 1) as usize;
                *slot = d.at2(y, x);
            }
            for s in 0..sub {
                for (k, l) in logits.iter_mut().enumerate() {
                    *l = mask_logits.at3(k * sub + s, i, j);
                }
                let peak = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut norm = 0.0;
                let mut acc = 0.0;
                for (l, v) in logits.iter().zip(&neigh) {
                    let e = (l - peak).exp();
                    norm += e;
                    acc += e * v;
                }
                let (sy, sx) = (s / f, s % f);
                out.set2(i * f + sy, j * f + sx, f as f64 * acc / norm);
            }
        }
    }
    Ok(out)
}

/// Each coarse value `d` becomes a 4×4 block of `4d`.
pub fn upsample_nearest(d: &Tensor) -> Result<Tensor> {
    let (h, w) = d.dims2()?;
    let f = UPSAMPLE_FACTOR;
    Ok(Tensor::from_fn2(h * f, w * f, |y, x| f as f64 * d.at2(y / f, x / f)))
}
