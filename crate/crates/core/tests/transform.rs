mod common;

use celtlab_core::transform::{
    deinterleave, interleave, mdct_reference, DeEmphasis, FrameDuration, Mdct, PreEmphasis, OVERLAP,
};

fn noise(len: usize, seed: u64) -> Vec<f64> {
    common::noise(len, seed, 20_000.0)
}

#[test]
fn long_blocks_reconstruct() {
    for (i, d) in FrameDuration::ALL.into_iter().enumerate() {
        let x = noise(d.frame_size() * 40, i as u64);
        let rms = common::mdct_round_trip(d, 1, &x);
        assert!(rms < 1e-9, "{d:?}: {rms:e}");
    }
}

#[test]
fn short_blocks_reconstruct() {
    for d in [FrameDuration::Ms5, FrameDuration::Ms10, FrameDuration::Ms20] {
        let blocks = d.frame_size() / 120;
        let x = noise(d.frame_size() * 30, 7);
        let rms = common::mdct_round_trip(d, blocks, &x);
        assert!(rms < 1e-9, "{d:?}: {rms:e}");
    }
}

#[test]
fn fast_matches_direct_formula() {
    for n in [120, 240, 480, 960] {
        let m = Mdct::new(n);
        let span = noise(n + OVERLAP, n as u64);
        let fast = m.forward(&span);
        let slow = mdct_reference(&span, n);
        let scale = slow.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-9 * scale, "n={n}");
        }
    }
}

#[test]
fn interleave_inverts() {
    let x: Vec<f64> = (0..960).map(|v| v as f64).collect();
    for blocks in [2, 4, 8] {
        assert_eq!(deinterleave(&interleave(&x, blocks), blocks), x);
    }
}

#[test]
fn emphasis_inverts() {
    let x = noise(5000, 3);
    let mut y = x.clone();
    let (mut pre, mut de) = (PreEmphasis::default(), DeEmphasis::default());
    for c in y.chunks_mut(333) {
        pre.process(c);
    }
    for c in y.chunks_mut(120) {
        de.process(c);
    }
    for (a, b) in x.iter().zip(&y) {
        assert!((a - b).abs() < 1e-6);
    }
}
