//! Naive reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scalestereo::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// `C[i, j, k] = Σ_c left[c, i, j] · right[c, i, k]`.
pub fn naive_correlation(left: &Tensor, right: &Tensor) -> Tensor {
    let (c, h, w) = left.dims3().unwrap();
    let mut out = Tensor::zeros(&[h, w, w]);
    for i in 0..h {
        for j in 0..w {
            for k in 0..w {
                let mut acc = 0.0;
                for ch in 0..c {
                    acc += left.at3(ch, i, j) * right.at3(ch, i, k);
                }
                out.set3(i, j, k, acc);
            }
        }
    }
    out
}

/// Zero-padded cross-correlation, one output value at a time.
pub fn naive_conv2d(input: &Tensor, kernel: &Tensor, bias: &Tensor, stride: usize, pad: usize) -> Tensor {
    let (c_in, h, w) = input.dims3().unwrap();
    let s = kernel.shape();
    let (c_out, kh, kw) = (s[0], s[2], s[3]);
    let ho = (h + 2 * pad - kh) / stride + 1;
    let wo = (w + 2 * pad - kw) / stride + 1;
    let k_at = |o: usize, c: usize, y: usize, x: usize| kernel.data()[((o * c_in + c) * kh + y) * kw + x];
    Tensor::from_fn3(c_out, ho, wo, |o, i, j| {
        let mut acc = bias.data()[o];
        for c in 0..c_in {
            for ky in 0..kh {
                for kx in 0..kw {
                    let y = (i * stride + ky) as isize - pad as isize;
                    let x = (j * stride + kx) as isize - pad as isize;
                    if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
                        acc += k_at(o, c, ky, kx) * input.at3(c, y as usize, x as usize);
                    }
                }
            }
        }
        acc
    })
}

/// Owned ConvGRU weights.
pub struct GruWeights {
    pub wz: Tensor,
    pub bz: Tensor,
    pub wr: Tensor,
    pub br: Tensor,
    pub wh: Tensor,
    pub bh: Tensor,
}

impl GruWeights {
    pub fn random(rng: &mut ChaCha8Rng, hid: usize, x_ch: usize, k: usize) -> Self {
        let ks = [hid, hid + x_ch, k, k];
        Self {
            wz: random_tensor(rng, &ks, -0.5, 0.5),
            bz: random_tensor(rng, &[hid], -0.5, 0.5),
            wr: random_tensor(rng, &ks, -0.5, 0.5),
            br: random_tensor(rng, &[hid], -0.5, 0.5),
            wh: random_tensor(rng, &ks, -0.5, 0.5),
            bh: random_tensor(rng, &[hid], -0.5, 0.5),
        }
    }

    pub fn params(&self) -> scalestereo::updater::GruParams<'_> {
        scalestereo::updater::GruParams {
            wz: &self.wz,
            bz: &self.bz,
            wr: &self.wr,
            br: &self.br,
            wh: &self.wh,
            bh: &self.bh,
        }
    }
}

fn stack(a: &Tensor, b: &Tensor) -> Tensor {
    let (ca, h, w) = a.dims3().unwrap();
    let (cb, _, _) = b.dims3().unwrap();
    Tensor::from_fn3(
        ca + cb,
        h,
        w,
        |c, i, j| if c < ca { a.at3(c, i, j) } else { b.at3(c - ca, i, j) },
    )
}

/// The ConvGRU formulas evaluated one element at a time.
pub fn naive_gru(h: &Tensor, gates: (&Tensor, &Tensor, &Tensor), x: &Tensor, p: &GruWeights) -> Tensor {
    let pad = p.wz.shape()[2] / 2;
    let hx = stack(h, x);
    let az = naive_conv2d(&hx, &p.wz, &p.bz, 1, pad);
    let ar = naive_conv2d(&hx, &p.wr, &p.br, 1, pad);
    let (c, hh, ww) = h.dims3().unwrap();
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let z = Tensor::from_fn3(c, hh, ww, |a, i, j| sig(az.at3(a, i, j) + gates.0.at3(a, i, j)));
    let r = Tensor::from_fn3(c, hh, ww, |a, i, j| sig(ar.at3(a, i, j) + gates.1.at3(a, i, j)));
    let rh = Tensor::from_fn3(c, hh, ww, |a, i, j| r.at3(a, i, j) * h.at3(a, i, j));
    let ah = naive_conv2d(&stack(&rh, x), &p.wh, &p.bh, 1, pad);
    Tensor::from_fn3(c, hh, ww, |a, i, j| {
        let cand = (ah.at3(a, i, j) + gates.2.at3(a, i, j)).tanh();
        let zv = z.at3(a, i, j);
        (1.0 - zv) * h.at3(a, i, j) + zv * cand
    })
}

/// Convex upsampling computed per full-resolution output pixel.
pub fn naive_convex_upsample(d: &Tensor, logits: &Tensor) -> Tensor {
    let (h, w) = d.dims2().unwrap();
    Tensor::from_fn2(4 * h, 4 * w, |y, x| {
        let (i, j, sy, sx) = (y / 4, x / 4, y % 4, x % 4);
        let sub = sy * 4 + sx;
        let mut num = 0.0;
        let mut den = 0.0;
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let k = ((dy + 1) * 3 + dx + 1) as usize;
                let yy = (i as isize + dy).clamp(0, h as isize - 1) as usize;
                let xx = (j as isize + dx).clamp(0, w as isize - 1) as usize;
                let e = logits.at3(k * 16 + sub, i, j).exp();
                num += e * d.at2(yy, xx);
                den += e;
            }
        }
        4.0 * num / den
    })
}

/// Min and max of the clamped 3×3 coarse window around `(i, j)`.
pub fn window_range(d: &Tensor, i: usize, j: usize) -> (f64, f64) {
    let (h, w) = d.dims2().unwrap();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for dy in -1isize..=1 {
        for dx in -1isize..=1 {
            let y = (i as isize + dy).clamp(0, h as isize - 1) as usize;
            let x = (j as isize + dx).clamp(0, w as isize - 1) as usize;
            lo = lo.min(d.at2(y, x));
            hi = hi.max(d.at2(y, x));
        }
    }
    (lo, hi)
}

pub fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Features whose correlation volume is a shifted identity: left column `j`
/// matches right column `j − true_d` exactly and nothing else.
pub fn shifted_identity_pair(h: usize, w: usize, true_d: &dyn Fn(usize, usize) -> usize) -> scalestereo::FeaturePair {
    let right = Tensor::from_fn3(w, h, w, |c, _, k| (c == k) as u8 as f64);
    let left = Tensor::from_fn3(w, h, w, |c, i, j| {
        let d = true_d(i, j);
        (j >= d && c == j - d) as u8 as f64
    });
    scalestereo::FeaturePair::new(left, right).unwrap()
}
