//! Matching-feature and context encoders.
//!
//! Both are three-layer CNNs with strides 2, 2, 1, so a `3 × H × W` image
//! maps to `c × H/4 × W/4`. The context trunk branches into two further
//! stride-2 convolutions for the 1/8 and 1/16 levels. When the bundle carries
//! an auxiliary encoder, its quarter-resolution output is passed through a
//! 1×1 channel-align conv and added to the base map before anything else
//! consumes it.

use crate::config::{EngineConfig, UPSAMPLE_FACTOR};
use crate::dataio::WeightBundle;
use crate::error::{shape_err, Result};
use crate::model::apply_conv;
use crate::tensor::{conv2d_forward, relu, Tensor};

/// Quarter-resolution matching features of a rectified pair.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePair {
    pub left: Tensor,
    pub right: Tensor,
}

impl FeaturePair {
    pub fn new(left: Tensor, right: Tensor) -> Result<Self> {
        let (c, _, _) = left.dims3()?;
        if left.shape() != right.shape() || c == 0 {
            return shape_err(format!("feature maps {:?} and {:?}", left.shape(), right.shape()));
        }
        Ok(Self { left, right })
    }

    /// `(c, h, w)`
    pub fn dims(&self) -> (usize, usize, usize) {
        self.left.dims3().expect("validated at construction")
    }
}

/// Context features for one GRU level.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextLevel {
    pub context: Tensor,
    pub gate_z: Tensor,
    pub gate_r: Tensor,
    pub gate_h: Tensor,
    pub hidden_init: Tensor,
}

/// Context at 1/4, 1/8 and 1/16 resolution, finest first.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextSet {
    pub levels: Vec<ContextLevel>,
}

fn check_image(img: &Tensor) -> Result<(usize, usize)> {
    let (c, h, w) = img.dims3()?;
    if c != 3 {
        return shape_err(format!("image must have 3 channels, got {c}"));
    }
    if h % 16 != 0 || w % 16 != 0 || h == 0 || w == 0 {
        return shape_err(format!("image {h}x{w} is not divisible by 16"));
    }
    Ok((h, w))
}

fn run_trunk(weights: &WeightBundle, prefix: &str, img: &Tensor) -> Result<Tensor> {
    let x = relu(&apply_conv(weights, &format!("{prefix}.conv1"), img, 2)?);
    let x = relu(&apply_conv(weights, &format!("{prefix}.conv2"), &x, 2)?);
    apply_conv(weights, &format!("{prefix}.conv3"), &x, 1)
}

/// `base + align(aux)`, where `align` is a conv with "same" padding.
pub fn fuse_features(base: &Tensor, aux: &Tensor, align_kernel: &Tensor, align_bias: &Tensor) -> Result<Tensor> {
    let (_, bh, bw) = base.dims3()?;
    let (_, ah, aw) = aux.dims3()?;
    if (bh, bw) != (ah, aw) {
        return shape_err(format!("base {bh}x{bw} vs auxiliary {ah}x{aw}"));
    }
    let k = align_kernel.shape().get(2).copied().unwrap_or(1);
    let aligned = conv2d_forward(aux, align_kernel, align_bias, 1, k / 2)?;
    base.add(&aligned)
}

fn fuse_named(weights: &WeightBundle, name: &str, base: &Tensor, aux: &Tensor) -> Result<Tensor> {
    fuse_features(
        base,
        aux,
        weights.get(&format!("{name}.kernel"))?,
        weights.get(&format!("{name}.bias"))?,
    )
}

fn aux_enabled(weights: &WeightBundle, cfg: &EngineConfig) -> bool {
    cfg.aux_channels > 0 && weights.contains("aux.conv1.kernel")
}

/// Encodes one image into quarter-resolution matching features.
pub fn encode_matching_single(img: &Tensor, weights: &WeightBundle, cfg: &EngineConfig) -> Result<Tensor> {
    check_image(img)?;
    let base = run_trunk(weights, "fe", img)?;
    if aux_enabled(weights, cfg) {
        let aux = run_trunk(weights, "aux", img)?;
        fuse_named(weights, "fuse.fe.align", &base, &aux)
    } else {
        Ok(base)
    }
}

pub fn encode_matching(
    left: &Tensor,
    right: &Tensor,
    weights: &WeightBundle,
    cfg: &EngineConfig,
) -> Result<FeaturePair> {
    let (lh, lw) = check_image(left)?;
    let (rh, rw) = check_image(right)?;
    if (lh, lw) != (rh, rw) {
        return shape_err(format!("left {lh}x{lw} vs right {rh}x{rw}"));
    }
    let (l, r) = rayon::join(
        || encode_matching_single(left, weights, cfg),
        || encode_matching_single(right, weights, cfg),
    );
    FeaturePair::new(l?, r?)
}

pub fn encode_context(left: &Tensor, weights: &WeightBundle, cfg: &EngineConfig) -> Result<ContextSet> {
    check_image(left)?;
    let mut l0 = run_trunk(weights, "ce", left)?;
    if aux_enabled(weights, cfg) {
        let aux = run_trunk(weights, "aux", left)?;
        l0 = fuse_named(weights, "fuse.ce.align", &l0, &aux)?;
    }
    let l1 = apply_conv(weights, "ce.down1", &relu(&l0), 2)?;
    let l2 = apply_conv(weights, "ce.down2", &relu(&l1), 2)?;

    let mut levels = Vec::with_capacity(3);
    for (k, ctx) in [l0, l1, l2].into_iter().enumerate() {
        let act = relu(&ctx);
        let gate = |g: &str| apply_conv(weights, &format!("ce.l{k}.{g}"), &act, 1);
        let (gate_z, gate_r, gate_h) = (gate("cz")?, gate("cr")?, gate("ch")?);
        let init_name = format!("ce.l{k}.init");
        let hidden_init = if weights.contains(&format!("{init_name}.kernel")) {
            apply_conv(weights, &init_name, &ctx, 1)?.map(f64::tanh)
        } else {
            let (_, h, w) = gate_z.dims3()?;
            Tensor::zeros(&[cfg.hidden_channels, h, w])
        };
        levels.push(ContextLevel {
            context: ctx,
            gate_z,
            gate_r,
            gate_h,
            hidden_init,
        });
    }
    Ok(ContextSet { levels })
}

/// Non-learned matching features: each quarter-resolution pixel is described
/// by its 4×4×3 full-resolution block, mean-centred and scaled to unit norm.
///
/// With per-pixel random textures these descriptors are nearly orthogonal
/// between distinct blocks and identical for blocks that match exactly, which
/// is what the greedy oracle mode relies on.
pub fn patch_features(left: &Tensor, right: &Tensor) -> Result<FeaturePair> {
    let (h, w) = check_image(left)?;
    if check_image(right)? != (h, w) {
        return shape_err("left and right images differ in size");
    }
    let f = UPSAMPLE_FACTOR;
    let describe = |img: &Tensor| -> Tensor {
        let (qh, qw) = (h / f, w / f);
        let dim = 3 * f * f;
        let mut out = Tensor::zeros(&[dim, qh, qw]);
        let mut block = vec![0.0; dim];
        for i in 0..qh {
            for j in 0..qw {
                let mut n = 0;
                for c in 0..3 {
                    for dy in 0..f {
                        for dx in 0..f {
                            block[n] = img.at3(c, i * f + dy, j * f + dx);
                            n += 1;
                        }
                    }
                }
                let mean = block.iter().sum::<f64>() / dim as f64;
                block.iter_mut().for_each(|v| *v -= mean);
                let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm > 1e-12 {
                    for (c, v) in block.iter().enumerate() {
                        out.set3(c, i, j, v / norm);
                    }
                }
            }
        }
        out
    };
    FeaturePair::new(describe(left), describe(right))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::seeded_weights;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(h: usize, w: usize, seed: u64) -> Tensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn3(3, h, w, |_, _, _| rng.random::<f64>())
    }

    #[test]
    fn stride_arithmetic() {
        let cfg = EngineConfig::small();
        let wts = seeded_weights(&cfg, 0);
        let img = noise(32, 32, 1);
        let fp = encode_matching(&img, &img, &wts, &cfg).unwrap();
        assert_eq!(fp.dims(), (cfg.feature_channels, 8, 8));
        assert_eq!(fp.left, fp.right);

        let ctx = encode_context(&noise(64, 64, 2), &wts, &cfg).unwrap();
        let sizes: Vec<_> = ctx.levels.iter().map(|l| l.context.shape()[1..].to_vec()).collect();
        assert_eq!(sizes, vec![vec![16, 16], vec![8, 8], vec![4, 4]]);
        for l in &ctx.levels {
            assert_eq!(l.gate_z.shape()[0], cfg.hidden_channels);
            assert_eq!(l.gate_r.shape()[0], cfg.hidden_channels);
            assert_eq!(l.gate_h.shape()[0], cfg.hidden_channels);
            assert!(l.hidden_init.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn context_is_deterministic_and_honours_init_head() {
        let cfg = EngineConfig::small();
        let mut wts = seeded_weights(&cfg, 0);
        let img = noise(32, 48, 5);
        assert_eq!(
            encode_context(&img, &wts, &cfg).unwrap(),
            encode_context(&img, &wts, &cfg).unwrap()
        );
        let c = cfg.context_channels;
        wts.insert("ce.l1.init.kernel", Tensor::full(&[cfg.hidden_channels, c, 1, 1], 0.1))
            .unwrap();
        wts.insert("ce.l1.init.bias", Tensor::zeros(&[cfg.hidden_channels]))
            .unwrap();
        let ctx = encode_context(&img, &wts, &cfg).unwrap();
        assert!(ctx.levels[1].hidden_init.data().iter().any(|&v| v != 0.0));
        assert!(ctx.levels[1].hidden_init.data().iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn divisibility_and_missing_weights() {
        let cfg = EngineConfig::small();
        let wts = seeded_weights(&cfg, 0);
        assert!(encode_matching(&noise(24, 32, 0), &noise(24, 32, 0), &wts, &cfg).is_err());
        let empty = WeightBundle::new(None);
        let err = encode_matching(&noise(16, 16, 0), &noise(16, 16, 0), &empty, &cfg)
            .unwrap_err()
            .to_string();
        assert!(err.contains("fe.conv1"), "{err}");
    }

    #[test]
    fn fusion_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut rnd = |s: &[usize]| {
            Tensor::new(
                s.to_vec(),
                (0..s.iter().product()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap()
        };
        let base = rnd(&[4, 3, 5]);
        let aux = rnd(&[2, 3, 5]);
        let k = rnd(&[4, 2, 1, 1]);
        let b = rnd(&[4]);
        let zero_aux = Tensor::zeros(&[2, 3, 5]);
        let zero_b = Tensor::zeros(&[4]);
        assert_eq!(fuse_features(&base, &zero_aux, &k, &zero_b).unwrap(), base);

        let zero_base = Tensor::zeros(&[4, 3, 5]);
        let aligned = conv2d_forward(&aux, &k, &b, 1, 0).unwrap();
        assert_eq!(fuse_features(&zero_base, &aux, &k, &b).unwrap(), aligned);

        let diff = fuse_features(&base, &aux, &k, &b)
            .unwrap()
            .zip_map(&fuse_features(&zero_base, &aux, &k, &b).unwrap(), |a, c| a - c)
            .unwrap();
        for (d, e) in diff.data().iter().zip(base.data()) {
            assert!((d - e).abs() < 1e-15);
        }
        assert!(fuse_features(&base, &rnd(&[2, 4, 5]), &k, &b).is_err());
    }

    #[test]
    fn patch_descriptors_are_unit_and_match_exact_shifts() {
        let img = noise(16, 32, 4);
        let fp = patch_features(&img, &img).unwrap();
        let (c, h, w) = fp.dims();
        assert_eq!((c, h, w), (48, 4, 8));
        for i in 0..h {
            for j in 0..w {
                let n: f64 = (0..c).map(|k| fp.left.at3(k, i, j).powi(2)).sum();
                assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }
}
