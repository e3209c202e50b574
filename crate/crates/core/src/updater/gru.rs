use crate::dataio::WeightBundle;
use crate::error::{shape_err, Result};
use crate::tensor::{conv2d_forward, sigmoid, Tensor};

/// Kernels and biases of the three ConvGRU gates.
#[derive(Clone, Copy, Debug)]
pub struct GruParams<'a> {
    pub wz: &'a Tensor,
    pub bz: &'a Tensor,
    pub wr: &'a Tensor,
    pub br: &'a Tensor,
    pub wh: &'a Tensor,
    pub bh: &'a Tensor,
}

impl<'a> GruParams<'a> {
    /// Reads `{prefix}.{z,r,h}.{kernel,bias}`.
    pub fn from_bundle(bundle: &'a WeightBundle, prefix: &str) -> Result<Self> {
        let g = |gate: &str, part: &str| bundle.get(&format!("{prefix}.{gate}.{part}"));
        Ok(Self {
            wz: g("z", "kernel")?,
            bz: g("z", "bias")?,
            wr: g("r", "kernel")?,
            br: g("r", "bias")?,
            wh: g("h", "kernel")?,
            bh: g("h", "bias")?,
        })
    }
}

/// Intermediate values of one ConvGRU update.
#[derive(Clone, Debug, PartialEq)]
pub struct GruTrace {
    pub update_gate: Tensor,
    pub reset_gate: Tensor,
    pub candidate: Tensor,
    pub hidden: Tensor,
}

/// One ConvGRU update.
///
/// ```text
/// z  = σ(conv([h, x], Wz) + cz)
/// r  = σ(conv([h, x], Wr) + cr)
/// h~ = tanh(conv([r ⊙ h, x], Wh) + ch)
/// h' = (1 − z) ⊙ h + z ⊙ h~
/// ```
///
/// `gates` holds the context features `(cz, cr, ch)`, each shaped like `hidden`.
pub fn gru_step(
    hidden: &Tensor,
    gates: (&Tensor, &Tensor, &Tensor),
    x: &Tensor,
    params: &GruParams<'_>,
) -> Result<Tensor> {
    Ok(gru_trace(hidden, gates, x, params)?.hidden)
}

/// [`gru_step`] keeping the gate activations and the candidate state.
pub fn gru_trace(
    hidden: &Tensor,
    gates: (&Tensor, &Tensor, &Tensor),
    x: &Tensor,
    params: &GruParams<'_>,
) -> Result<GruTrace> {
    let (cz, cr, ch) = gates;
    for g in [cz, cr, ch] {
        if g.shape() != hidden.shape() {
            return shape_err(format!("gate bias {:?} vs hidden {:?}", g.shape(), hidden.shape()));
        }
    }
    let pad = |k: &Tensor| k.shape().get(2).copied().unwrap_or(1) / 2;
    let hx = Tensor::concat_channels(&[hidden, x])?;
    let z = conv2d_forward(&hx, params.wz, params.bz, 1, pad(params.wz))?.zip_map(cz, |a, b| sigmoid(a + b))?;
    let r = conv2d_forward(&hx, params.wr, params.br, 1, pad(params.wr))?.zip_map(cr, |a, b| sigmoid(a + b))?;
    let rh = r.zip_map(hidden, |a, b| a * b)?;
    let rhx = Tensor::concat_channels(&[&rh, x])?;
    let cand = conv2d_forward(&rhx, params.wh, params.bh, 1, pad(params.wh))?.zip_map(ch, |a, b| (a + b).tanh())?;
    let mut out = hidden.clone();
    for ((o, &zv), &cv) in out.data_mut().iter_mut().zip(z.data()).zip(cand.data()) {
        *o = (1.0 - zv) * *o + zv * cv;
    }
    Ok(GruTrace {
        update_gate: z,
        reset_gate: r,
        candidate: cand,
        hidden: out,
    })
}
