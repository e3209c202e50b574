mod common;

use common::rng;
use rand::Rng;
use scalestereo::dataio::{load_weights, read_disp_png16, read_pfm, save_weights, write_disp_png16, write_pfm};
use scalestereo::{seeded_weights, EngineConfig, Mask, Tensor};

#[test]
fn pfm_round_trips_fifty_maps() {
    let mut r = rng(21);
    for _ in 0..50 {
        let (h, w) = (r.random_range(1..20), r.random_range(1..20));
        let map = Tensor::from_fn2(h, w, |_, _| r.random_range(-500.0f32..500.0) as f64);
        let mask = Mask::from_fn(h, w, |i, j| (i * 7 + j * 3) % 5 != 0);
        let bytes = write_pfm(&map, Some(&mask)).unwrap();
        let (back, back_mask) = read_pfm(&bytes).unwrap();
        assert_eq!(back_mask, mask);
        for i in 0..h {
            for j in 0..w {
                if mask.get(i, j) {
                    assert_eq!(back.at2(i, j).to_bits(), map.at2(i, j).to_bits());
                }
            }
        }
    }
}

#[test]
fn pfm_stores_the_bottom_row_first() {
    let map = Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap();
    let bytes = write_pfm(&map, None).unwrap();
    let payload = &bytes[bytes.len() - 8..];
    assert_eq!(f32::from_le_bytes(payload[..4].try_into().unwrap()), 2.0);
    assert_eq!(f32::from_le_bytes(payload[4..].try_into().unwrap()), 1.0);
}

#[test]
fn png16_round_trips_fifty_maps() {
    let mut r = rng(22);
    for _ in 0..50 {
        let (h, w) = (r.random_range(1..20), r.random_range(1..20));
        let map = Tensor::from_fn2(h, w, |_, _| r.random_range(1u32..65536) as f64 / 256.0);
        let mask = Mask::from_fn(h, w, |i, j| (i + 2 * j) % 4 != 1);
        let (back, back_mask) = read_disp_png16(&write_disp_png16(&map, Some(&mask)).unwrap()).unwrap();
        assert_eq!(back_mask, mask);
        for i in 0..h {
            for j in 0..w {
                if mask.get(i, j) {
                    assert_eq!(back.at2(i, j).to_bits(), map.at2(i, j).to_bits());
                    assert_eq!((back.at2(i, j) * 256.0).fract(), 0.0);
                } else {
                    assert_eq!(back.at2(i, j), 0.0);
                }
            }
        }
    }
}

#[test]
fn weight_bundle_round_trips() {
    let bundle = seeded_weights(&EngineConfig::small(), 77);
    let back = load_weights(&save_weights(&bundle).unwrap()).unwrap();
    assert_eq!(back.seed, Some(77));
    assert_eq!(back.len(), bundle.len());
    for ((na, ta), (nb, tb)) in bundle.iter().zip(back.iter()) {
        assert_eq!(na, nb);
        assert!(ta.bit_eq(tb));
    }
}
