mod common;

use std::collections::HashSet;

use celtlab_core::bands::{Lcg, Spread};
use celtlab_core::entropy::{RangeDecoder, RangeEncoder};
use celtlab_core::pvq::{
    choose_k, code_band, code_band_stereo, codebook_size, decode_index, encode_index, pvq_search, BandCoding, StereoMode,
};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use proptest::prelude::*;

#[test]
fn counts_match_enumeration() {
    for n in 0..=10 {
        for k in 0..=7 {
            let all = common::enumerate(n, k);
            assert_eq!(codebook_size(n, k as u32), BigUint::from(all.len()), "V({n},{k})");
        }
    }
    assert_eq!(codebook_size(5, 0), BigUint::from(1u32));
    assert_eq!(codebook_size(0, 3), BigUint::from(0u32));
}

#[test]
fn index_is_a_bijection() {
    for n in 1..=6 {
        for k in 0..=5 {
            let all = common::enumerate(n, k);
            let v = all.len() as u64;
            let mut seen = HashSet::new();
            for y in &all {
                let i = encode_index(y);
                let iv = i.to_u64().unwrap();
                assert!(iv < v);
                assert!(seen.insert(iv));
                assert_eq!(&decode_index(&i, n, k as u32).unwrap(), y);
            }
        }
    }
}

#[test]
fn index_out_of_range_is_rejected() {
    assert!(decode_index(&codebook_size(4, 3), 4, 3).is_err());
}

#[test]
fn small_budget_example() {
    assert_eq!(choose_k(2, 16), 1);
    assert_eq!(choose_k(8, 0), 0);
}

fn round_trip(x: &[f64], blocks: usize, budget: i64, spread: Spread) -> (Vec<f64>, usize) {
    let mut rng = Lcg::new(9);
    let mut enc = RangeEncoder::new(1275);
    let mut ctx = BandCoding::new(spread, &mut rng);
    let a = code_band(&mut enc, x, blocks, budget, &mut ctx);
    let depth = ctx.max_depth;
    let used = enc.tell_frac() as i64;
    let bytes = enc.finish().unwrap();
    let mut rng = Lcg::new(9);
    let mut dec = RangeDecoder::new(&bytes);
    let mut ctx = BandCoding::new(spread, &mut rng);
    let b = code_band(&mut dec, &vec![0.0; x.len()], blocks, budget, &mut ctx);
    assert_eq!(a, b);
    assert!(used - 8 <= budget + 8, "used {used} of {budget}");
    (a.unwrap_or_default(), depth)
}

fn unit(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn split_depth_bounds() {
    let x: Vec<f64> = (0..32).map(|i| ((i * 7 % 11) as f64 - 5.0) / 10.0).collect();
    let x: Vec<f64> = x.iter().map(|v| v / unit(&x)).collect();
    let (y, depth) = round_trip(&x, 1, 200 * 8, Spread::Delta10);
    assert!(depth >= 1);
    assert!((unit(&y) - 1.0).abs() < 1e-6);
    let x176: Vec<f64> = (0..176).map(|i| ((i * 13 % 17) as f64 - 8.0) / 10.0).collect();
    let (_, depth) = round_trip(&x176, 1, 10_000 * 8, Spread::Delta10);
    assert_eq!(depth, 4);
    let (_, depth) = round_trip(&x, 1, 30 * 8, Spread::Delta10);
    assert_eq!(depth, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn search_hits_pulse_count(x in prop::collection::vec(-1.0f64..1.0, 1..40), k in 0u32..60) {
        let y = pvq_search(&x, k);
        prop_assert_eq!(y.iter().map(|v| v.unsigned_abs()).sum::<u32>(), k);
        for (a, b) in x.iter().zip(&y) {
            prop_assert!(*b == 0 || a.signum() == (*b as f64).signum());
        }
    }

    #[test]
    fn bands_decode_to_unit_norm(
        raw in prop::collection::vec(-1.0f64..1.0, 4..=96),
        budget in 8i64..4000,
        spread in 0u32..4,
        split in 0usize..3,
    ) {
        let blocks = [1, 2, 4][split];
        let n = raw.len() / blocks * blocks;
        let x: Vec<f64> = raw[..n].to_vec();
        let norm = unit(&x).max(1e-9);
        let x: Vec<f64> = x.iter().map(|v| v / norm).collect();
        let (y, _) = round_trip(&x, blocks, budget, Spread::from_index(spread));
        if !y.is_empty() {
            prop_assert!((unit(&y) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn stereo_modes_round_trip(
        seed in 0u32..1000,
        n in 2usize..48,
        budget in 16i64..3000,
        mode in 0usize..3,
    ) {
        let mut g = Lcg::new(seed);
        let mut l: Vec<f64> = (0..n).map(|_| g.next_signed()).collect();
        let mut r: Vec<f64> = (0..n).map(|_| g.next_signed()).collect();
        let (nl, nr) = (unit(&l), unit(&r));
        l.iter_mut().for_each(|v| *v /= nl);
        r.iter_mut().for_each(|v| *v /= nr);
        let mode = [StereoMode::Dual, StereoMode::MidSide, StereoMode::Intensity][mode];
        let mut rng = Lcg::new(3);
        let mut enc = RangeEncoder::new(1275);
        let mut ctx = BandCoding::new(Spread::Delta5, &mut rng);
        let a = code_band_stereo(&mut enc, &l, &r, (1.0, 0.7), mode, 1, budget, &mut ctx);
        let bytes = enc.finish().unwrap();
        let mut rng = Lcg::new(3);
        let mut dec = RangeDecoder::new(&bytes);
        let mut ctx = BandCoding::new(Spread::Delta5, &mut rng);
        let zeros = vec![0.0; n];
        let b = code_band_stereo(&mut dec, &zeros, &zeros, (1.0, 1.0), mode, 1, budget, &mut ctx);
        prop_assert_eq!(&a, &b);
        for v in [a.0, a.1].into_iter().flatten() {
            prop_assert!((unit(&v) - 1.0).abs() < 1e-6);
        }
    }
}
