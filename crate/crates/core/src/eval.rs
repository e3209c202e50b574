//! Disparity metrics, the sequence loss, and affine-aligned depth analysis.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::mask::Mask;
use crate::tensor::Tensor;

pub const DEFAULT_THRESHOLDS: [f64; 3] = [1.0, 2.0, 3.0];
pub const DEFAULT_GAMMA: f64 = 0.9;
pub const DEFAULT_RATIO_CLAMP: f64 = 0.05;
/// Below this variance of `z` the affine fit is treated as degenerate.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadRate {
    pub threshold: f64,
    /// Percentage of valid pixels whose absolute error exceeds `threshold`.
    pub percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub epe: f64,
    pub bad: Vec<BadRate>,
    /// Percentage with error > 3 px and > 5% of the ground truth.
    pub d1: f64,
    pub valid_pixels: usize,
    pub total_pixels: usize,
}

impl MetricReport {
    pub fn bad_at(&self, threshold: f64) -> Option<f64> {
        self.bad.iter().find(|b| b.threshold == threshold).map(|b| b.percent)
    }

    /// One `key=value` pair per line; bad rates are keyed `bad_<threshold>`.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "epe={}", self.epe);
        for b in &self.bad {
            let _ = writeln!(s, "bad_{}={}", b.threshold, b.percent);
        }
        let _ = writeln!(s, "d1={}", self.d1);
        let _ = writeln!(s, "valid_pixels={}", self.valid_pixels);
        let _ = writeln!(s, "total_pixels={}", self.total_pixels);
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn check_pair(a: &Tensor, b: &Tensor, mask: &Mask) -> Result<()> {
    a.dims2()?;
    if a.shape() != b.shape() {
        return shape_err(format!("{:?} vs {:?}", a.shape(), b.shape()));
    }
    mask.check_matches(a)
}

fn masked<'a>(a: &'a Tensor, b: &'a Tensor, mask: &'a Mask) -> impl Iterator<Item = (f64, f64)> + 'a {
    a.data()
        .iter()
        .zip(b.data())
        .zip(mask.data())
        .filter(|(_, &m)| m)
        .map(|((&x, &y), _)| (x, y))
}

pub fn compute_metrics(pred: &Tensor, gt: &Tensor, mask: &Mask, thresholds: &[f64]) -> Result<MetricReport> {
    check_pair(pred, gt, mask)?;
    let n = mask.count();
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let mut sum = 0.0;
    let mut over = vec![0usize; thresholds.len()];
    let mut d1 = 0usize;
    for (p, g) in masked(pred, gt, mask) {
        let e = (p - g).abs();
        sum += e;
        for (c, &t) in over.iter_mut().zip(thresholds) {
            *c += (e > t) as usize;
        }
        d1 += (e > 3.0 && e > 0.05 * g.abs()) as usize;
    }
    let pct = |c: usize| 100.0 * c as f64 / n as f64;
    Ok(MetricReport {
        epe: sum / n as f64,
        bad: thresholds
            .iter()
            .zip(&over)
            .map(|(&threshold, &c)| BadRate {
                threshold,
                percent: pct(c),
            })
            .collect(),
        d1: pct(d1),
        valid_pixels: n,
        total_pixels: mask.data().len(),
    })
}

/// Mean absolute error over `mask`.
pub fn masked_epe(pred: &Tensor, gt: &Tensor, mask: &Mask) -> Result<f64> {
    Ok(compute_metrics(pred, gt, mask, &[])?.epe)
}

/// `Σₙ γ^(N−n) · mean_mask |gt − predₙ|` for predictions `n = 1..N`.
/// `0⁰` is taken as 1, so `γ = 0` keeps only the last prediction.
pub fn sequence_loss(preds: &[Tensor], gt: &Tensor, mask: &Mask, gamma: f64) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::InvalidArgument(
            "sequence loss needs at least one prediction".into(),
        ));
    }
    let n = preds.len();
    let mut loss = 0.0;
    for (k, p) in preds.iter().enumerate() {
        loss += gamma.powi((n - 1 - k) as i32) * masked_epe(p, gt, mask)?;
    }
    Ok(loss)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineFit {
    pub s_hat: f64,
    pub t_hat: f64,
    /// Mean absolute error of `s_hat·z + t_hat` against ground truth.
    pub epe: f64,
    pub degenerate: bool,
}

impl AffineFit {
    pub fn apply(&self, z: &Tensor) -> Tensor {
        z.map(|v| self.s_hat * v + self.t_hat)
    }
}

/// Least-squares `(s, t)` minimizing `Σ (s·z + t − gt)²` over `mask`.
pub fn affine_align(z: &Tensor, gt: &Tensor, mask: &Mask) -> Result<AffineFit> {
    check_pair(z, gt, mask)?;
    let n = mask.count();
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    if n < 2 {
        return Err(Error::InvalidArgument(
            "affine alignment needs at least 2 valid pixels".into(),
        ));
    }
    let nf = n as f64;
    let (mut mz, mut mg) = (0.0, 0.0);
    for (a, b) in masked(z, gt, mask) {
        mz += a;
        mg += b;
    }
    mz /= nf;
    mg /= nf;
    let (mut szz, mut szg) = (0.0, 0.0);
    for (a, b) in masked(z, gt, mask) {
        szz += (a - mz) * (a - mz);
        szg += (a - mz) * (b - mg);
    }
    let degenerate = szz / nf < DEGENERATE_VARIANCE;
    let (s_hat, t_hat) = if degenerate {
        (0.0, mg)
    } else {
        let s = szg / szz;
        (s, mg - s * mz)
    };
    let epe = masked(z, gt, mask)
        .map(|(a, b)| (s_hat * a + t_hat - b).abs())
        .sum::<f64>()
        / nf;
    Ok(AffineFit {
        s_hat,
        t_hat,
        epe,
        degenerate,
    })
}

/// Ratio map `gt / max(d_hat, clamp_min)` and its population standard
/// deviation over `mask`.
pub fn ratio_map_std(gt: &Tensor, d_hat: &Tensor, mask: &Mask, clamp_min: f64) -> Result<(Tensor, f64)> {
    check_pair(gt, d_hat, mask)?;
    let n = mask.count();
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let ratio = gt.zip_map(d_hat, |g, d| g / d.max(clamp_min))?;
    let vals: Vec<f64> = ratio
        .data()
        .iter()
        .zip(mask.data())
        .filter(|(_, &m)| m)
        .map(|(&r, _)| r)
        .collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n as f64;
    Ok((ratio, var.sqrt()))
}

/// EPE after alignment and ratio-map STD for one relative depth map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthAnalysis {
    pub fit: AffineFit,
    pub std: f64,
}

pub fn analyze_depth(z: &Tensor, gt: &Tensor, mask: &Mask) -> Result<DepthAnalysis> {
    let fit = affine_align(z, gt, mask)?;
    let (_, std) = ratio_map_std(gt, &fit.apply(z), mask, DEFAULT_RATIO_CLAMP)?;
    Ok(DepthAnalysis { fit, std })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(v: &[f64]) -> Tensor {
        Tensor::new(vec![1, v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn exact_prediction_scores_zero() {
        let gt = row(&[1.0, 5.0, 9.0]);
        let r = compute_metrics(&gt, &gt, &Mask::all(1, 3), &DEFAULT_THRESHOLDS).unwrap();
        assert_eq!(r.epe, 0.0);
        assert!(r.bad.iter().all(|b| b.percent == 0.0));
        assert_eq!(r.d1, 0.0);
    }

    #[test]
    fn bad3_quarter() {
        let gt = row(&[10.0; 4]);
        let pred = row(&[10.0, 11.0, 12.0, 15.0]);
        let r = compute_metrics(&pred, &gt, &Mask::all(1, 4), &[3.0]).unwrap();
        assert_eq!(r.bad_at(3.0), Some(25.0));
        assert_eq!(r.epe, 2.0);
    }

    #[test]
    fn d1_needs_both_conditions() {
        let r = compute_metrics(&row(&[96.0]), &row(&[100.0]), &Mask::all(1, 1), &[3.0]).unwrap();
        assert_eq!(r.bad_at(3.0), Some(100.0));
        assert_eq!(r.d1, 0.0);
        let r = compute_metrics(&row(&[90.0]), &row(&[100.0]), &Mask::all(1, 1), &[3.0]).unwrap();
        assert_eq!(r.d1, 100.0);
    }

    #[test]
    fn mask_restricts_and_empty_errors() {
        let m = Mask::new(1, 2, vec![true, false]).unwrap();
        let r = compute_metrics(&row(&[1.0, 100.0]), &row(&[1.0, 0.0]), &m, &[1.0]).unwrap();
        assert_eq!((r.epe, r.valid_pixels, r.total_pixels), (0.0, 1, 2));
        let none = Mask::new(1, 2, vec![false, false]).unwrap();
        assert!(matches!(
            compute_metrics(&row(&[1.0, 1.0]), &row(&[1.0, 1.0]), &none, &[1.0]),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn report_serializations() {
        let r = compute_metrics(&row(&[1.0, 3.0]), &row(&[1.0, 1.0]), &Mask::all(1, 2), &[1.0, 2.0]).unwrap();
        let kv = r.to_key_value();
        assert!(kv.contains("epe=1\n") && kv.contains("bad_1=50\n") && kv.contains("bad_2=0\n"));
        let back: MetricReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn loss_examples() {
        let gt = row(&[4.0]);
        let m = Mask::all(1, 1);
        let preds = vec![row(&[5.0]), row(&[3.0]), row(&[5.0])];
        assert!((sequence_loss(&preds, &gt, &m, 0.9).unwrap() - 2.71).abs() < 1e-12);
        assert_eq!(sequence_loss(&[gt.clone(), gt.clone()], &gt, &m, 0.9).unwrap(), 0.0);
        let last_only = vec![row(&[100.0]), row(&[6.0])];
        assert_eq!(sequence_loss(&last_only, &gt, &m, 0.0).unwrap(), 2.0);
        assert!(sequence_loss(&[], &gt, &m, 0.9).is_err());
    }

    #[test]
    fn affine_exact_and_degenerate() {
        let z = row(&[0.0, 1.0, 2.5, 4.0]);
        let gt = z.map(|v| 2.0 * v + 3.0);
        let f = affine_align(&z, &gt, &Mask::all(1, 4)).unwrap();
        assert!((f.s_hat - 2.0).abs() < 1e-12 && (f.t_hat - 3.0).abs() < 1e-12);
        assert!(f.epe < 1e-12 && !f.degenerate);

        let f = affine_align(&row(&[7.0; 4]), &row(&[1.0, 2.0, 3.0, 6.0]), &Mask::all(1, 4)).unwrap();
        assert!(f.degenerate);
        assert_eq!((f.s_hat, f.t_hat), (0.0, 3.0));

        let one = Mask::new(1, 4, vec![true, false, false, false]).unwrap();
        assert!(affine_align(&z, &gt, &one).is_err());
    }

    #[test]
    fn ratio_examples() {
        let m = Mask::all(1, 4);
        let gt = row(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(ratio_map_std(&gt, &gt, &m, 0.05).unwrap().1, 0.0);
        let hat = row(&[1.0, 2.0, 1.0, 4.0 / 3.0]);
        let (r, std) = ratio_map_std(&gt, &hat, &m, 0.05).unwrap();
        assert_eq!(r.data()[..3], [1.0, 1.0, 3.0]);
        assert!((std - 1.0).abs() < 1e-12);
        let (r, _) = ratio_map_std(&row(&[1.0]), &row(&[0.0]), &Mask::all(1, 1), 0.05).unwrap();
        assert!((r.data()[0] - 20.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn epe_shift_invariant(vals in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..20), c in -100.0f64..100.0) {
            let n = vals.len();
            let p = row(&vals.iter().map(|v| v.0).collect::<Vec<_>>());
            let g = row(&vals.iter().map(|v| v.1).collect::<Vec<_>>());
            let m = Mask::all(1, n);
            let a = masked_epe(&p, &g, &m).unwrap();
            let b = masked_epe(&p.map(|v| v + c), &g.map(|v| v + c), &m).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn affine_recovers_parameters(z in prop::collection::vec(0.0f64..10.0, 3..30), a in -5.0f64..5.0, b in -5.0f64..5.0) {
            let zmin = z.iter().cloned().fold(f64::INFINITY, f64::min);
            let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assume!(zmax - zmin > 0.1);
            let zt = row(&z);
            let f = affine_align(&zt, &zt.map(|v| a * v + b), &Mask::all(1, z.len())).unwrap();
            prop_assert!((f.s_hat - a).abs() < 1e-9 && (f.t_hat - b).abs() < 1e-9);
        }

        #[test]
        fn loss_monotone_in_error(e in prop::collection::vec(0.0f64..5.0, 1..6), k in 0usize..6, bump in 0.0f64..3.0) {
            let k = k % e.len();
            let gt = row(&[0.0]);
            let m = Mask::all(1, 1);
            let preds: Vec<Tensor> = e.iter().map(|&v| row(&[v])).collect();
            let mut worse = preds.clone();
            worse[k] = row(&[e[k] + bump]);
            prop_assert!(sequence_loss(&worse, &gt, &m, 0.9).unwrap() >= sequence_loss(&preds, &gt, &m, 0.9).unwrap());
        }
    }
}
