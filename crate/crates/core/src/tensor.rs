//! Dense row-major arrays and the sampling, pooling and convolution kernels
//! the rest of the engine is built from.
//!
//! Layout is always last-dimension-fastest. Correlation volumes are stored as
//! `h × w × w'` so that every lookup along the disparity axis walks a
//! contiguous row.

use rayon::prelude::*;

use crate::error::{shape_err, Error, Result};

/// Dense `f64` array with an explicit shape.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return shape_err(format!(
                "shape {:?} holds {} values, payload has {}",
                shape,
                expected,
                data.len()
            ));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    /// Builds a 2-D tensor from a closure over `(row, col)`.
    pub fn from_fn2(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(h * w);
        for i in 0..h {
            for j in 0..w {
                data.push(f(i, j));
            }
        }
        Self {
            shape: vec![h, w],
            data,
        }
    }

    /// Builds a 3-D tensor from a closure over `(a, b, c)`.
    pub fn from_fn3(d0: usize, d1: usize, d2: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(d0 * d1 * d2);
        for a in 0..d0 {
            for b in 0..d1 {
                for c in 0..d2 {
                    data.push(f(a, b, c));
                }
            }
        }
        Self {
            shape: vec![d0, d1, d2],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Shape as `(h, w)`; errors unless rank 2.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape[..] {
            [h, w] => Ok((h, w)),
            _ => shape_err(format!("expected rank-2 tensor, got {:?}", self.shape)),
        }
    }

    /// Shape as `(a, b, c)`; errors unless rank 3.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [a, b, c] => Ok((a, b, c)),
            _ => shape_err(format!("expected rank-3 tensor, got {:?}", self.shape)),
        }
    }

    #[inline]
    pub fn at2(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.shape[1] + j]
    }

    #[inline]
    pub fn at3(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.shape[1] + b) * self.shape[2] + c]
    }

    #[inline]
    pub fn set2(&mut self, i: usize, j: usize, v: f64) {
        let w = self.shape[1];
        self.data[i * w + j] = v;
    }

    #[inline]
    pub fn set3(&mut self, a: usize, b: usize, c: usize, v: f64) {
        let (d1, d2) = (self.shape[1], self.shape[2]);
        self.data[(a * d1 + b) * d2 + c] = v;
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape != other.shape {
            return shape_err(format!("{:?} vs {:?}", self.shape, other.shape));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|v| v * k)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// True when both tensors have the same shape and bit-identical values.
    pub fn bit_eq(&self, other: &Tensor) -> bool {
        self.shape == other.shape
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Channels `[start, end)` of a `c × h × w` tensor.
    pub fn channels(&self, start: usize, end: usize) -> Result<Tensor> {
        let (c, h, w) = self.dims3()?;
        if start > end || end > c {
            return shape_err(format!("channel range {start}..{end} of {c}"));
        }
        let plane = h * w;
        Tensor::new(vec![end - start, h, w], self.data[start * plane..end * plane].to_vec())
    }

    /// Stacks `c_i × h × w` tensors along the channel axis.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
        let Some(first) = parts.first() else {
            return shape_err("concat of zero tensors");
        };
        let (_, h, w) = first.dims3()?;
        let mut shape_c = 0;
        let mut data = Vec::new();
        for p in parts {
            let (c, ph, pw) = p.dims3()?;
            if (ph, pw) != (h, w) {
                return shape_err(format!("concat spatial {ph}x{pw} vs {h}x{w}"));
            }
            shape_c += c;
            data.extend_from_slice(&p.data);
        }
        Tensor::new(vec![shape_c, h, w], data)
    }
}

/// Linear interpolation of `row` at real position `pos`; entries outside
/// `[0, row.len())` read as zero.
#[inline]
pub fn sample_row(row: &[f64], pos: f64) -> f64 {
    let x0 = pos.floor();
    let alpha = pos - x0;
    let n = row.len() as isize;
    let i0 = x0 as isize;
    let i1 = i0 + 1;
    let v0 = if (0..n).contains(&i0) { row[i0 as usize] } else { 0.0 };
    let v1 = if (0..n).contains(&i1) { row[i1 as usize] } else { 0.0 };
    (1.0 - alpha) * v0 + alpha * v1
}

/// Samples `volume[h, w, :]` at the real positions `indexes[h, w, :]`.
pub fn bilinear_sample_last(volume: &Tensor, indexes: &Tensor) -> Result<Tensor> {
    let (h, w, wp) = volume.dims3()?;
    let (ih, iw, k) = indexes.dims3()?;
    if (ih, iw) != (h, w) {
        return shape_err(format!("volume leading dims {h}x{w} vs indexes {ih}x{iw}"));
    }
    let mut out = Vec::with_capacity(h * w * k);
    for p in 0..h * w {
        let row = &volume.data[p * wp..(p + 1) * wp];
        for &pos in &indexes.data[p * k..(p + 1) * k] {
            out.push(sample_row(row, pos));
        }
    }
    Tensor::new(vec![h, w, k], out)
}

/// Halves the last axis by averaging adjacent pairs. An odd trailing entry is
/// dropped.
pub fn avg_pool_last(volume: &Tensor) -> Result<Tensor> {
    let (h, w, wp) = volume.dims3()?;
    if wp < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot pool a last axis of length {wp}"
        )));
    }
    let half = wp / 2;
    let mut out = Vec::with_capacity(h * w * half);
    for row in volume.data.chunks_exact(wp) {
        for j in 0..half {
            out.push((row[2 * j] + row[2 * j + 1]) / 2.0);
        }
    }
    Tensor::new(vec![h, w, half], out)
}

/// 2-D cross-correlation with zero padding.
///
/// `input` is `c_in × h × w`, `kernel` is `c_out × c_in × kh × kw`, `bias` has
/// `c_out` entries. Output channels are computed in parallel; every output
/// value accumulates bias first, then input channels, kernel rows and kernel
/// columns in order, so the result does not depend on thread scheduling.
pub fn conv2d_forward(input: &Tensor, kernel: &Tensor, bias: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
    let (c_in, h, w) = input.dims3()?;
    let [c_out, kc_in, kh, kw] = kernel.shape[..] else {
        return shape_err(format!("kernel must be rank 4, got {:?}", kernel.shape));
    };
    if kc_in != c_in {
        return shape_err(format!("kernel expects {kc_in} input channels, input has {c_in}"));
    }
    if bias.shape != [c_out] {
        return shape_err(format!("bias {:?} for {c_out} output channels", bias.shape));
    }
    if kh % 2 == 0 || kw % 2 == 0 {
        return Err(Error::InvalidArgument(format!("kernel {kh}x{kw} must be odd")));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    if h + 2 * pad < kh || w + 2 * pad < kw {
        return shape_err(format!(
            "{h}x{w} input with pad {pad} is smaller than the {kh}x{kw} kernel"
        ));
    }
    let ho = (h + 2 * pad - kh) / stride + 1;
    let wo = (w + 2 * pad - kw) / stride + 1;

    let mut out = vec![0.0; c_out * ho * wo];
    out.par_chunks_mut(ho * wo).enumerate().for_each(|(oc, plane)| {
        plane.fill(bias.data[oc]);
        for ic in 0..c_in {
            let src = &input.data[ic * h * w..(ic + 1) * h * w];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wt = kernel.data[((oc * c_in + ic) * kh + ky) * kw + kx];
                    accumulate_tap(plane, src, (h, w), (ho, wo), (ky, kx), stride, pad, wt);
                }
            }
        }
    });
    Tensor::new(vec![c_out, ho, wo], out)
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn accumulate_tap(
    plane: &mut [f64],
    src: &[f64],
    (h, w): (usize, usize),
    (ho, wo): (usize, usize),
    (ky, kx): (usize, usize),
    stride: usize,
    pad: usize,
    wt: f64,
) {
    // Output columns whose input column ox*stride + kx - pad lands in [0, w).
    let ox_lo = pad.saturating_sub(kx).div_ceil(stride);
    let ox_hi = if w + pad > kx {
        ((w + pad - kx - 1) / stride + 1).min(wo)
    } else {
        0
    };
    if ox_lo >= ox_hi {
        return;
    }
    for oy in 0..ho {
        let iy = (oy * stride + ky) as isize - pad as isize;
        if iy < 0 || iy >= h as isize {
            continue;
        }
        let src_row = &src[iy as usize * w..(iy as usize + 1) * w];
        let dst = &mut plane[oy * wo..(oy + 1) * wo];
        if stride == 1 {
            let off = ox_lo + kx - pad;
            let n = ox_hi - ox_lo;
            for (d, s) in dst[ox_lo..ox_hi].iter_mut().zip(&src_row[off..off + n]) {
                *d += wt * s;
            }
        } else {
            for (ox, d) in dst.iter_mut().enumerate().take(ox_hi).skip(ox_lo) {
                *d += wt * src_row[ox * stride + kx - pad];
            }
        }
    }
}

/// 2× bilinear upsampling of a `c × h × w` tensor with half-pixel centers and
/// edge clamping.
pub fn upsample2x_bilinear(x: &Tensor) -> Result<Tensor> {
    let (c, h, w) = x.dims3()?;
    let (ho, wo) = (2 * h, 2 * w);
    let taps = |o: usize, n: usize| -> (usize, usize, f64) {
        let src = ((o as f64 + 0.5) / 2.0 - 0.5).max(0.0);
        let i0 = (src.floor() as usize).min(n - 1);
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, src - i0 as f64)
    };
    let mut out = Tensor::zeros(&[c, ho, wo]);
    for ch in 0..c {
        for oy in 0..ho {
            let (y0, y1, fy) = taps(oy, h);
            for ox in 0..wo {
                let (x0, x1, fx) = taps(ox, w);
                let top = (1.0 - fx) * x.at3(ch, y0, x0) + fx * x.at3(ch, y0, x1);
                let bot = (1.0 - fx) * x.at3(ch, y1, x0) + fx * x.at3(ch, y1, x1);
                out.set3(ch, oy, ox, (1.0 - fy) * top + fy * bot);
            }
        }
    }
    Ok(out)
}

/// 2× downsampling of a `c × h × w` tensor by 2×2 block means (bilinear
/// resampling at half resolution).
pub fn downsample2x_avg(x: &Tensor) -> Result<Tensor> {
    let (c, h, w) = x.dims3()?;
    if h % 2 != 0 || w % 2 != 0 {
        return shape_err(format!("cannot halve {h}x{w}"));
    }
    let (ho, wo) = (h / 2, w / 2);
    Ok(Tensor::from_fn3(c, ho, wo, |ch, i, j| {
        (x.at3(ch, 2 * i, 2 * j)
            + x.at3(ch, 2 * i, 2 * j + 1)
            + x.at3(ch, 2 * i + 1, 2 * j)
            + x.at3(ch, 2 * i + 1, 2 * j + 1))
            / 4.0
    }))
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}
