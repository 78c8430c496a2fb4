mod common;

use celtlab_core::energy::Laplace;
use celtlab_core::entropy::{Coder, RangeDecoder, RangeEncoder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CDF: [u32; 5] = [0, 3, 40, 41, 64];

#[derive(Debug, PartialEq, Eq, Clone, Copy)]
enum Sym {
    Bit(bool),
    Uint(u32),
    Raw(u32),
    Cdf(usize),
    Laplace(i32),
}

/// Codes a pseudo-random sequence of symbols until fewer than 40 bits
/// remain. The same `seed` drives the encoder and decoder.
fn script<C: Coder>(coder: &mut C, seed: u64) -> Vec<Sym> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while coder.remaining_frac() >= 40 * 8 {
        let sym = match rng.gen_range(0..5) {
            0 => {
                let logp = rng.gen_range(1..=15);
                let v = rng.gen_bool(0.5);
                Sym::Bit(coder.code_bit_logp(v, logp))
            }
            1 => {
                let total = rng.gen_range(2..=1u32 << 24);
                let v = rng.gen_range(0..total);
                Sym::Uint(coder.code_uint(v, total))
            }
            2 => {
                let n = rng.gen_range(1..=16);
                let v = rng.gen_range(0..1u32 << n);
                Sym::Raw(coder.code_bits(v, n))
            }
            3 => {
                let v = rng.gen_range(0..4);
                Sym::Cdf(coder.code_cdf(v, &CDF))
            }
            _ => {
                let m = Laplace { fs0: rng.gen_range(2000..20000), decay: rng.gen_range(2000..15000) };
                let v = rng.gen_range(-12..=12);
                Sym::Laplace(coder.code_laplace(v, m))
            }
        };
        out.push(sym);
    }
    out
}

#[test]
fn random_frames_round_trip() {
    let mut sizes = ChaCha8Rng::seed_from_u64(1);
    for frame in 0..10_000u64 {
        let cap = sizes.gen_range(8..=400);
        let mut enc = RangeEncoder::new(cap);
        let sent = script(&mut enc, frame);
        let tell = enc.tell_frac();
        let bytes = enc.finish().expect("frame fits");
        assert_eq!(bytes.len(), cap, "CBR size");
        let mut dec = RangeDecoder::new(&bytes);
        let got = script(&mut dec, frame);
        assert_eq!(got, sent, "frame {frame}");
        assert_eq!(dec.tell_frac(), tell);
        assert!(!dec.corrupt());
    }
}

#[test]
fn raw_flips_in_full_frames() {
    let (trials, desyncs) = common::raw_flip_desyncs(2_000);
    assert!(trials > 1_000);
    assert_eq!(desyncs, 0);
}

#[test]
fn overflow_is_reported() {
    let mut enc = RangeEncoder::new(4);
    for _ in 0..40 {
        enc.encode_uint(12345, 1 << 20);
    }
    assert!(enc.finish().is_err());
}

#[test]
fn raw_bit_flips_leave_range_symbols_intact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let cap = 64;
        // totals up to 256 are range coded without raw low bits
        let symbols: Vec<(u32, u32)> = (0..20).map(|_| (rng.gen_range(0..200), rng.gen_range(0..256))).collect();
        let mut enc = RangeEncoder::new(cap);
        for &(u, r) in &symbols {
            enc.encode_uint(u, 200);
            enc.write_bits(r, 8);
        }
        let bytes = enc.finish().unwrap();
        let raw_bits = 20 * 8;
        let bit = rng.gen_range(0..raw_bits);
        let mut flipped = bytes.clone();
        flipped[cap - 1 - bit / 8] ^= 1 << (bit % 8);
        let mut dec = RangeDecoder::new(&flipped);
        for (i, &(u, r)) in symbols.iter().enumerate() {
            assert_eq!(dec.decode_uint(200), u);
            let got = dec.read_bits(8);
            if i == bit / 8 {
                assert_eq!(got ^ r, 1 << (bit % 8));
            } else {
                assert_eq!(got, r);
            }
        }
    }
}
