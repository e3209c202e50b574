//! Direct lookups: the sampling positions are materialized as an index
//! tensor on every call and handed to [`bilinear_sample_last`].

use crate::config::LookupConfig;
use crate::error::{shape_err, Result};
use crate::tensor::{bilinear_sample_last, Tensor};

use super::CorrelationPyramid;

pub(crate) fn check_disparity(volume: &Tensor, d: &Tensor) -> Result<(usize, usize)> {
    let (h, w, _) = volume.dims3()?;
    let (dh, dw) = d.dims2()?;
    if (dh, dw) != (h, w) {
        return shape_err(format!("disparity {dh}x{dw} vs volume {h}x{w}"));
    }
    Ok((h, w))
}

/// Pyramid lookup: for each level `l` and offset `o ∈ [−r, r]`, samples
/// level `l` at `(j − d)/2^l + o`. Output is `h × w × (levels·(2r+1))`,
/// level-major with ascending offsets.
pub fn pyramid_lookup(pyr: &CorrelationPyramid, d: &Tensor, cfg: &LookupConfig) -> Result<Tensor> {
    let (h, w) = check_disparity(pyr.finest(), d)?;
    let r = cfg.radius as isize;
    let taps = 2 * cfg.radius + 1;
    let levels = cfg.num_levels;
    if pyr.num_levels() < levels {
        return shape_err(format!(
            "lookup wants {levels} levels, pyramid has {}",
            pyr.num_levels()
        ));
    }
    let k_total = levels * taps;
    let mut out = Tensor::zeros(&[h, w, k_total]);
    for (l, volume) in pyr.levels().iter().take(levels).enumerate() {
        let inv = 1.0 / (1u64 << l) as f64;
        let mut idx = Tensor::zeros(&[h, w, taps]);
        for i in 0..h {
            for j in 0..w {
                let centre = (j as f64 - d.at2(i, j)) * inv;
                for (t, o) in (-r..=r).enumerate() {
                    idx.set3(i, j, t, centre + o as f64);
                }
            }
        }
        let sampled = bilinear_sample_last(volume, &idx)?;
        for i in 0..h {
            for j in 0..w {
                for t in 0..taps {
                    out.set3(i, j, l * taps + t, sampled.at3(i, j, t));
                }
            }
        }
    }
    Ok(out)
}

/// Scale lookup: for each factor `s` and `δ ∈ {−1, 0, 1}`, samples the
/// finest volume at `j − (s·d + δ)`. Output is `h × w × 3·|factors|`,
/// factor-major.
pub fn scale_lookup(c1: &Tensor, d: &Tensor, cfg: &LookupConfig) -> Result<Tensor> {
    let (h, w) = check_disparity(c1, d)?;
    let k = 3 * cfg.scale_factors.len();
    let mut idx = Tensor::zeros(&[h, w, k]);
    for i in 0..h {
        for j in 0..w {
            let dv = d.at2(i, j);
            for (m, &s) in cfg.scale_factors.iter().enumerate() {
                for (t, delta) in [-1.0, 0.0, 1.0].into_iter().enumerate() {
                    idx.set3(i, j, 3 * m + t, j as f64 - (s * dv + delta));
                }
            }
        }
    }
    bilinear_sample_last(c1, &idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::{build_correlation, build_pyramid};
    use crate::encoders::FeaturePair;

    /// One-hot features: right column k is e_k, left column j is e_{j − d*}.
    fn shifted_identity(h: usize, w: usize, true_d: usize) -> Tensor {
        let right = Tensor::from_fn3(w, h, w, |c, _, k| (c == k) as u8 as f64);
        let left = Tensor::from_fn3(w, h, w, |c, _, j| (j >= true_d && c == j - true_d) as u8 as f64);
        build_correlation(&FeaturePair::new(left, right).unwrap()).unwrap()
    }

    #[test]
    fn cardinalities() {
        let c1 = shifted_identity(1, 16, 0);
        let d = Tensor::full(&[1, 16], 2.0);
        let cfg = LookupConfig::default();
        let pyr = build_pyramid(c1.clone(), 2).unwrap();
        assert_eq!(pyramid_lookup(&pyr, &d, &cfg).unwrap().shape(), &[1, 16, 18]);
        assert_eq!(scale_lookup(&c1, &d, &cfg).unwrap().shape(), &[1, 16, 24]);
    }

    #[test]
    fn centre_sample_hits_exact_match() {
        let c1 = shifted_identity(2, 12, 3);
        let pyr = build_pyramid(c1, 2).unwrap();
        let d = Tensor::full(&[2, 12], 3.0);
        let cfg = LookupConfig::default();
        let out = pyramid_lookup(&pyr, &d, &cfg).unwrap();
        for j in 3..12 {
            assert_eq!(out.at3(0, j, cfg.radius), 1.0);
            for t in (0..9).filter(|&t| t != cfg.radius) {
                assert_eq!(out.at3(0, j, t), 0.0);
            }
        }
    }

    #[test]
    fn integer_positions_agree_with_indexing() {
        let c1 = shifted_identity(1, 16, 2).map(|v| v * 3.0 + 0.5);
        let pyr = build_pyramid(c1.clone(), 3).unwrap();
        let d = Tensor::from_fn2(1, 16, |_, j| (j % 3) as f64 * 4.0);
        let cfg = LookupConfig {
            radius: 2,
            num_levels: 3,
            scale_factors: vec![0.5, 1.0, 2.0],
        };
        let pl = pyramid_lookup(&pyr, &d, &cfg).unwrap();
        for j in 0..16 {
            let dv = d.at2(0, j) as isize;
            for l in 0..3 {
                let vol = &pyr.levels()[l];
                let wl = vol.shape()[2] as isize;
                for (t, o) in (-2isize..=2).enumerate() {
                    let num = j as isize - dv;
                    if num % (1 << l) != 0 {
                        continue;
                    }
                    let pos = num / (1 << l) + o;
                    let want = if (0..wl).contains(&pos) {
                        vol.at3(0, j, pos as usize)
                    } else {
                        0.0
                    };
                    assert_eq!(pl.at3(0, j, l * 5 + t), want);
                }
            }
        }
        let sl = scale_lookup(&c1, &d, &cfg).unwrap();
        for j in 0..16 {
            let dv = d.at2(0, j);
            for (m, s) in [0.5, 1.0, 2.0].iter().enumerate() {
                for (t, delta) in [-1.0, 0.0, 1.0].iter().enumerate() {
                    let pos = j as f64 - (s * dv + delta);
                    let want = if pos >= 0.0 && pos < 16.0 {
                        c1.at3(0, j, pos as usize)
                    } else {
                        0.0
                    };
                    assert_eq!(sl.at3(0, j, 3 * m + t), want);
                }
            }
        }
    }

    #[test]
    fn unit_scale_and_unit_radius_probe_the_same_positions() {
        let c1 = shifted_identity(2, 10, 1).map(|v| v + 0.25);
        let d = Tensor::from_fn2(2, 10, |i, j| 0.3 * (i + j) as f64);
        let pyr = build_pyramid(c1.clone(), 1).unwrap();
        let pl = pyramid_lookup(
            &pyr,
            &d,
            &LookupConfig {
                radius: 1,
                num_levels: 1,
                scale_factors: vec![1.0],
            },
        )
        .unwrap();
        let sl = scale_lookup(
            &c1,
            &d,
            &LookupConfig {
                radius: 1,
                num_levels: 1,
                scale_factors: vec![1.0],
            },
        )
        .unwrap();
        for i in 0..2 {
            for j in 0..10 {
                // PL is ordered by ascending offset (position j−d−1 first);
                // SL by ascending δ, i.e. descending position.
                for t in 0..3 {
                    assert!((pl.at3(i, j, t) - sl.at3(i, j, 2 - t)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn scaled_probe_positions() {
        let w = 24;
        let d = Tensor::full(&[1, w], 8.0);
        // Volume whose row value encodes its own index: sample k ↦ k.
        let c1 = Tensor::from_fn3(1, w, w, |_, _, k| k as f64);
        let cfg = LookupConfig::default();
        let sl = scale_lookup(&c1, &d, &cfg).unwrap();
        let j = w - 1;
        let probed: Vec<f64> = (0..8).map(|m| j as f64 - sl.at3(0, j, 3 * m + 1)).collect();
        assert_eq!(probed, vec![1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 16.0]);
    }

    #[test]
    fn half_scale_triplet_finds_overestimated_match() {
        let c1 = shifted_identity(1, 32, 4);
        let d = Tensor::full(&[1, 32], 8.0);
        let sl = scale_lookup(&c1, &d, &LookupConfig::default()).unwrap();
        for j in 8..32 {
            let (best, _) = (0..24)
                .map(|k| (k, sl.at3(0, j, k)))
                .fold((0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
            assert_eq!(best / 3, 2, "factor index for 1/2 at column {j}");
            assert_eq!(best % 3, 1);
        }
    }

    #[test]
    fn shape_checks() {
        let c1 = Tensor::zeros(&[2, 4, 4]);
        assert!(scale_lookup(&c1, &Tensor::zeros(&[2, 5]), &LookupConfig::default()).is_err());
    }
}
