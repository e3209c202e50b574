mod common;

use common::{max_abs_diff, naive_convex_upsample, naive_gru, random_tensor, rng, window_range, GruWeights};
use scalestereo::updater::{gru_trace, GruTrace};
use scalestereo::{
    build_correlation, build_pyramid, convex_upsample, delta_update_step, encode_context, encode_matching, gru_step,
    init_disparity, run_inference, seeded_weights, DepthEstimate, DisparityState, EngineConfig, Mode, Phase,
    Provenance, Tensor,
};

#[test]
fn gru_matches_naive_formulas() {
    let mut r = rng(1);
    for case in 0..10 {
        let (hid, xc) = (2 + case % 2, 1 + case % 3);
        let h = random_tensor(&mut r, &[hid, 3, 3], -1.0, 1.0);
        let x = random_tensor(&mut r, &[xc, 3, 3], -1.0, 1.0);
        let g: Vec<Tensor> = (0..3).map(|_| random_tensor(&mut r, &[hid, 3, 3], -1.0, 1.0)).collect();
        let p = GruWeights::random(&mut r, hid, xc, 3);
        let got = gru_step(&h, (&g[0], &g[1], &g[2]), &x, &p.params()).unwrap();
        let want = naive_gru(&h, (&g[0], &g[1], &g[2]), &x, &p);
        assert!(max_abs_diff(&got, &want) < 1e-6);

        let GruTrace {
            update_gate,
            reset_gate,
            ..
        } = gru_trace(&h, (&g[0], &g[1], &g[2]), &x, &p.params()).unwrap();
        for v in update_gate.data().iter().chain(reset_gate.data()) {
            assert!(*v > 0.0 && *v < 1.0);
        }
    }
}

#[test]
fn gru_with_zero_weights_halves_hidden() {
    let mut r = rng(2);
    let h = random_tensor(&mut r, &[3, 4, 5], -2.0, 2.0);
    let x = random_tensor(&mut r, &[2, 4, 5], -2.0, 2.0);
    let zero = Tensor::zeros(&[3, 4, 5]);
    let kz = Tensor::zeros(&[3, 5, 3, 3]);
    let bz = Tensor::zeros(&[3]);
    let p = scalestereo::updater::GruParams {
        wz: &kz,
        bz: &bz,
        wr: &kz,
        br: &bz,
        wh: &kz,
        bh: &bz,
    };
    let out = gru_step(&h, (&zero, &zero, &zero), &x, &p).unwrap();
    assert!(out.bit_eq(&h.map(|v| 0.5 * v)));
}

#[test]
fn convex_upsample_matches_naive_loop_and_bound() {
    let mut r = rng(3);
    for case in 0..100 {
        let (h, w) = (2 + case % 4, 3 + case % 5);
        let d = random_tensor(&mut r, &[h, w], 0.05, 30.0);
        let logits = random_tensor(&mut r, &[144, h, w], -4.0, 4.0);
        let up = convex_upsample(&d, &logits).unwrap();
        if case < 20 {
            assert!(max_abs_diff(&up, &naive_convex_upsample(&d, &logits)) < 1e-5);
        }
        for y in 0..4 * h {
            for x in 0..4 * w {
                let (lo, hi) = window_range(&d, y / 4, x / 4);
                let v = up.at2(y, x);
                assert!(v >= 4.0 * lo - 1e-9 && v <= 4.0 * hi + 1e-9);
            }
        }
    }
}

fn learned_inputs() -> (Tensor, Tensor, DepthEstimate) {
    let mut r = rng(9);
    let left = random_tensor(&mut r, &[3, 32, 64], 0.0, 1.0);
    let right = random_tensor(&mut r, &[3, 32, 64], 0.0, 1.0);
    let z = random_tensor(&mut r, &[8, 16], 0.0, 1.0);
    (left, right, DepthEstimate::new(z, Provenance::ExternalFile).unwrap())
}

#[test]
fn phase_schedule_follows_update_rules() {
    let cfg = EngineConfig {
        su_iters: 3,
        total_iters: 6,
        ..EngineConfig::small()
    };
    let w = seeded_weights(&cfg, 4);
    let (left, right, depth) = learned_inputs();
    let out = run_inference(&left, &right, &depth, &w, &cfg, Mode::Learned).unwrap();
    assert_eq!(out.full_res.len(), 6);
    assert_eq!(out.initial, init_disparity(&depth, 16, cfg.eta, cfg.eps));
    let mut prev = out.initial.clone();
    for (n, step) in out.steps.iter().enumerate() {
        let d = &out.quarter_res[n];
        let expected = if n < 3 {
            assert_eq!(step.phase, Phase::Scale);
            prev.zip_map(&step.update, |a, s| (s * a).max(cfg.eps)).unwrap()
        } else {
            assert_eq!(step.phase, Phase::Delta);
            prev.zip_map(&step.update, |a, dd| (a + dd).max(cfg.eps)).unwrap()
        };
        assert!(d.bit_eq(&expected));
        assert!(d.data().iter().all(|&v| v >= cfg.eps));
        if n < 3 {
            assert!(step.update.data().iter().all(|&s| s > 0.5 - 1e-12 && s < 2.0 + 1e-12));
        }
        assert_eq!(out.full_res[n].shape(), &[32, 64]);
        prev = d.clone();
    }
}

#[test]
fn inference_is_bitwise_deterministic() {
    let cfg = EngineConfig {
        su_iters: 2,
        total_iters: 4,
        ..EngineConfig::small()
    };
    let w = seeded_weights(&cfg, 6);
    let (left, right, depth) = learned_inputs();
    let a = run_inference(&left, &right, &depth, &w, &cfg, Mode::Learned).unwrap();
    let b = run_inference(&left, &right, &depth, &w, &cfg, Mode::Learned).unwrap();
    for (x, y) in a.full_res.iter().zip(&b.full_res) {
        assert!(x.bit_eq(y));
    }
}

#[test]
fn zero_scale_iterations_is_the_pure_delta_pipeline() {
    let cfg = EngineConfig {
        su_iters: 0,
        total_iters: 3,
        ..EngineConfig::small()
    };
    let w = seeded_weights(&cfg, 8);
    let (left, right, depth) = learned_inputs();
    let out = run_inference(&left, &right, &depth, &w, &cfg, Mode::Learned).unwrap();
    assert!(out.steps.iter().all(|s| s.phase == Phase::Delta));

    // Drive the delta step by hand through the direct lookup path.
    let pair = encode_matching(&left, &right, &w, &cfg).unwrap();
    let ctx = encode_context(&left, &w, &cfg).unwrap();
    let pyr = build_pyramid(build_correlation(&pair).unwrap(), cfg.lookup.num_levels).unwrap();
    let mut state = DisparityState::new(init_disparity(&depth, 16, cfg.eta, cfg.eps), Some(&ctx), 0);
    for n in 0..3 {
        let o = delta_update_step(&state, &pyr, &ctx, &w, &cfg).unwrap();
        assert!(o.state.d.bit_eq(&out.quarter_res[n]));
        assert!(convex_upsample(&o.state.d, &o.mask_logits)
            .unwrap()
            .bit_eq(&out.full_res[n]));
        state = o.state;
    }
}

#[test]
fn default_schedule_yields_32_maps() {
    let cfg = EngineConfig {
        hidden_channels: 4,
        feature_channels: 4,
        context_channels: 4,
        corr_enc_channels: 4,
        disp_enc_channels: 2,
        aux_channels: 0,
        ..EngineConfig::default()
    };
    let w = seeded_weights(&cfg, 1);
    let (left, right, depth) = learned_inputs();
    let out = run_inference(&left, &right, &depth, &w, &cfg, Mode::Learned).unwrap();
    assert_eq!(out.full_res.len(), 32);
    assert_eq!(out.steps.iter().filter(|s| s.phase == Phase::Scale).count(), 8);
}

#[test]
fn learned_mode_reports_missing_weights() {
    let cfg = EngineConfig::small();
    let mut w = seeded_weights(&cfg, 1);
    w.zero_prefix("du.");
    let (left, right, depth) = learned_inputs();
    assert!(run_inference(&left, &right, &depth, &w, &cfg, Mode::Learned).is_ok());
    let empty = scalestereo::dataio::WeightBundle::new(None);
    let err = run_inference(&left, &right, &depth, &empty, &cfg, Mode::Learned).unwrap_err();
    assert!(err.to_string().contains("fe.conv1"));
}
