//! Layer catalogue and seeded weight generation.
//!
//! Every convolution the engine runs is listed here with its bundle name,
//! so a bundle can be checked for completeness before inference and weights
//! saved by one build load in another.
//!
//! | prefix | role |
//! |---|---|
//! | `fe.conv{1,2,3}` | matching-feature encoder, strides 2, 2, 1 |
//! | `ce.conv{1,2,3}`, `ce.down{1,2}` | context trunk and its 1/8, 1/16 branches |
//! | `ce.l{0,1,2}.{cz,cr,ch}` | per-level gate-bias heads |
//! | `ce.l{k}.init` | optional hidden-state init head (tanh) |
//! | `aux.conv{1,2,3}` | auxiliary feature encoder |
//! | `fuse.{fe,ce}.align` | 1×1 channel-align conv applied to auxiliary features |
//! | `{su,du}.enc_corr`, `{su,du}.enc_disp` | lookup and disparity encoders |
//! | `{su,du}.gru{0,1,2}.{z,r,h}` | ConvGRU gates at 1/4, 1/8, 1/16 |
//! | `{su,du}.head.conv{1,2}` | scale (su) or delta (du) head |
//! | `{su,du}.mask` | convex-upsampling mask logits |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{EngineConfig, UPSAMPLE_FACTOR};
use crate::dataio::WeightBundle;
use crate::error::{Error, Result};
use crate::tensor::{conv2d_forward, Tensor};

/// Number of mask logits per coarse pixel: 3×3 neighbours × 4×4 sub-pixels.
pub const MASK_CHANNELS: usize = 9 * UPSAMPLE_FACTOR * UPSAMPLE_FACTOR;

/// One convolution layer as stored in a bundle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub c_out: usize,
    pub c_in: usize,
    pub k: usize,
}

impl LayerSpec {
    fn new(name: impl Into<String>, c_out: usize, c_in: usize, k: usize) -> Self {
        Self {
            name: name.into(),
            c_out,
            c_in,
            k,
        }
    }

    pub fn kernel_name(&self) -> String {
        format!("{}.kernel", self.name)
    }

    pub fn bias_name(&self) -> String {
        format!("{}.bias", self.name)
    }

    pub fn kernel_shape(&self) -> [usize; 4] {
        [self.c_out, self.c_in, self.k, self.k]
    }
}

/// The two update blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Scale,
    Delta,
}

impl Block {
    pub fn prefix(self) -> &'static str {
        match self {
            Block::Scale => "su",
            Block::Delta => "du",
        }
    }
}

fn trunk(prefix: &str, c_in: usize, width: usize, out: &mut Vec<LayerSpec>) {
    out.push(LayerSpec::new(format!("{prefix}.conv1"), width, c_in, 3));
    out.push(LayerSpec::new(format!("{prefix}.conv2"), width, width, 3));
    out.push(LayerSpec::new(format!("{prefix}.conv3"), width, width, 3));
}

/// Input channels of the GRU at `level` (0 = 1/4) excluding its own hidden state.
pub fn gru_input_channels(cfg: &EngineConfig, level: usize) -> usize {
    let hid = cfg.hidden_channels;
    match level {
        0 => cfg.corr_enc_channels + cfg.disp_enc_channels + hid,
        1 => 2 * hid,
        _ => hid,
    }
}

/// Layers of one update block.
pub fn block_layers(cfg: &EngineConfig, block: Block) -> Vec<LayerSpec> {
    let p = block.prefix();
    let hid = cfg.hidden_channels;
    let lookup_width = match block {
        Block::Scale => cfg.lookup.scale_width(),
        Block::Delta => cfg.lookup.pyramid_width(),
    };
    let mut v = vec![
        LayerSpec::new(format!("{p}.enc_corr"), cfg.corr_enc_channels, lookup_width, 3),
        LayerSpec::new(format!("{p}.enc_disp"), cfg.disp_enc_channels, 1, 3),
    ];
    for level in 0..3 {
        let c_in = hid + gru_input_channels(cfg, level);
        for gate in ["z", "r", "h"] {
            v.push(LayerSpec::new(format!("{p}.gru{level}.{gate}"), hid, c_in, 3));
        }
    }
    v.push(LayerSpec::new(format!("{p}.head.conv1"), hid, hid, 3));
    v.push(LayerSpec::new(format!("{p}.head.conv2"), 1, hid, 3));
    v.push(LayerSpec::new(format!("{p}.mask"), MASK_CHANNELS, hid, 3));
    v
}

/// Every layer the engine needs under `cfg`, in bundle order.
pub fn layer_specs(cfg: &EngineConfig) -> Vec<LayerSpec> {
    let mut v = Vec::new();
    trunk("fe", 3, cfg.feature_channels, &mut v);
    trunk("ce", 3, cfg.context_channels, &mut v);
    let c = cfg.context_channels;
    v.push(LayerSpec::new("ce.down1", c, c, 3));
    v.push(LayerSpec::new("ce.down2", c, c, 3));
    for level in 0..3 {
        for g in ["cz", "cr", "ch"] {
            v.push(LayerSpec::new(format!("ce.l{level}.{g}"), cfg.hidden_channels, c, 3));
        }
    }
    if cfg.aux_channels > 0 {
        trunk("aux", 3, cfg.aux_channels, &mut v);
        v.push(LayerSpec::new(
            "fuse.fe.align",
            cfg.feature_channels,
            cfg.aux_channels,
            1,
        ));
        v.push(LayerSpec::new("fuse.ce.align", c, cfg.aux_channels, 1));
    }
    v.extend(block_layers(cfg, Block::Scale));
    v.extend(block_layers(cfg, Block::Delta));
    v
}

/// Draws every layer from uniform(−k, k), k = 1/sqrt(fan_in), using a
/// ChaCha8 stream seeded with `seed`. Values are `f32`-representable so the
/// bundle survives a save/load cycle bit for bit.
pub fn seeded_weights(cfg: &EngineConfig, seed: u64) -> WeightBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bundle = WeightBundle::new(Some(seed));
    for spec in layer_specs(cfg) {
        let fan_in = spec.c_in * spec.k * spec.k;
        let bound = 1.0 / (fan_in as f32).sqrt();
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-bound..bound) as f64).collect() };
        let shape = spec.kernel_shape();
        let kernel =
            Tensor::new(shape.to_vec(), draw(shape.iter().product())).expect("catalogue shapes are consistent");
        let bias = Tensor::new(vec![spec.c_out], draw(spec.c_out)).expect("bias shape");
        bundle
            .insert(spec.kernel_name(), kernel)
            .expect("catalogue names are unique");
        bundle.insert(spec.bias_name(), bias).expect("unique");
    }
    bundle
}

/// Checks that `bundle` holds every layer of `cfg` with the right shape.
pub fn validate_bundle(bundle: &WeightBundle, cfg: &EngineConfig) -> Result<()> {
    for spec in layer_specs(cfg) {
        bundle.expect(&spec.kernel_name(), &spec.kernel_shape())?;
        bundle.expect(&spec.bias_name(), &[spec.c_out])?;
    }
    Ok(())
}

/// Runs the conv layer `name` (odd square kernel, "same" padding) on `input`.
pub fn apply_conv(bundle: &WeightBundle, name: &str, input: &Tensor, stride: usize) -> Result<Tensor> {
    let kernel = bundle.get(&format!("{name}.kernel"))?;
    let [c_out, c_in, k, _] = kernel.shape()[..] else {
        return Err(Error::Weight {
            name: name.to_string(),
            reason: format!("kernel shape {:?} is not rank 4", kernel.shape()),
        });
    };
    let (input_c, _, _) = input.dims3()?;
    if c_in != input_c {
        return Err(Error::Weight {
            name: name.to_string(),
            reason: format!("kernel takes {c_in} channels, input has {input_c}"),
        });
    }
    let bias = bundle.expect(&format!("{name}.bias"), &[c_out])?;
    conv2d_forward(input, kernel, bias, stride, k / 2)
}
