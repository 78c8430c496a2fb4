//! Measurements shared by the module tests and the acceptance report.
#![allow(dead_code)]

use std::collections::HashSet;

use celtlab_core::alloc::{code_alloc_params, compute_allocation, AllocConfig, AllocParams, AllocResult, BOOST_QUANTUM};
use celtlab_core::bands::{
    band_energy, band_holes, from_coding_order, spread, tf_transform, to_coding_order, validate_tf, BandLayout, Spread,
    NUM_BANDS,
};
use celtlab_core::codec::{CollapsePolicy, Decoder, Encoder, EncoderConfig, FrameDuration};
use celtlab_core::corpus::{generate, Signal};
use celtlab_core::energy::{ENERGY_MAX, ENERGY_MIN};
use celtlab_core::entropy::{Coder, RangeDecoder, RangeEncoder};
use celtlab_core::prefilter::{CombFilter, PitchParams, MAX_PERIOD, MIN_PERIOD};
use celtlab_core::pvq::{codebook_size, decode_index, encode_index};
use celtlab_core::quality;
use celtlab_core::transform::{FrameTransform, OVERLAP};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn noise(len: usize, seed: u64, amp: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-1.0..1.0) * amp).collect()
}

fn rel_rms(a: &[f64], b: &[f64]) -> f64 {
    let err: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let sig: f64 = b.iter().map(|v| v * v).sum();
    (err / sig.max(f64::MIN_POSITIVE)).sqrt()
}

/// Analysis and overlap-add synthesis of `x`; relative RMS error against
/// the input delayed by `OVERLAP`.
pub fn mdct_round_trip(duration: FrameDuration, blocks: usize, x: &[f64]) -> f64 {
    let t = FrameTransform::new(duration);
    let n = duration.frame_size();
    let mut tail = vec![0.0; OVERLAP];
    let mut mem = vec![0.0; OVERLAP];
    let mut y = Vec::with_capacity(x.len());
    for chunk in x.chunks_exact(n) {
        let mut span = std::mem::take(&mut tail);
        span.extend_from_slice(chunk);
        tail = span[n..].to_vec();
        y.extend(t.synthesize(&t.analyze(&span, blocks), blocks, &mut mem));
    }
    rel_rms(&y[OVERLAP..], &x[..y.len() - OVERLAP])
}

/// Every integer vector of length `n` with L1 norm `k`.
pub fn enumerate(n: usize, k: i32) -> Vec<Vec<i32>> {
    if n == 0 {
        return if k == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in -k..=k {
        for mut rest in enumerate(n - 1, k - first.abs()) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Checks the codebook size against enumeration and the index map for
/// being a bijection onto `[0, V)`.
pub fn pvq_check(n: usize, k: u32) -> Result<(), String> {
    let all = enumerate(n, k as i32);
    let v = codebook_size(n, k);
    if v != BigUint::from(all.len()) {
        return Err(format!("V({n},{k}) = {v}, enumeration {}", all.len()));
    }
    let mut seen = HashSet::with_capacity(all.len());
    for y in &all {
        let i = encode_index(y);
        let iv = i.to_u64().ok_or("index overflow")?;
        if iv >= all.len() as u64 || !seen.insert(iv) {
            return Err(format!("index {iv} of {y:?} repeated or out of range"));
        }
        match decode_index(&i, n, k) {
            Ok(back) if &back == y => {}
            _ => return Err(format!("index {iv} does not decode to {y:?}")),
        }
    }
    Ok(())
}

#[derive(Debug, PartialEq, Eq, Clone, Copy)]
pub enum Sym {
    Bit(bool),
    /// Value and total.
    Uint(u32, u32),
    /// Value and bit count.
    Raw(u32, u32),
    Cdf(usize),
}

impl Sym {
    /// Bits of this symbol stored in the raw region.
    fn raw_bits(&self) -> u32 {
        match *self {
            Sym::Raw(_, n) => n,
            Sym::Uint(_, total) => uint_shift(total),
            _ => 0,
        }
    }

    /// The part of the symbol carried by the range coder.
    fn range_part(&self) -> Sym {
        match *self {
            Sym::Raw(_, n) => Sym::Raw(0, n),
            Sym::Uint(v, total) => Sym::Uint(v >> uint_shift(total), total),
            s => s,
        }
    }
}

/// Low bits of a uniform symbol that are sent raw.
fn uint_shift(total: u32) -> u32 {
    let bits = 32 - (total - 1).leading_zeros();
    bits.saturating_sub(8)
}

const CDF: [u32; 5] = [0, 3, 40, 41, 64];

/// Codes a pseudo-random sequence of symbols until fewer than 40 bits
/// remain. The same `seed` drives encoder and decoder.
pub fn symbol_script<C: Coder>(coder: &mut C, seed: u64) -> Vec<Sym> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while coder.remaining_frac() >= 40 * 8 {
        let sym = match rng.gen_range(0..4) {
            0 => {
                let logp = rng.gen_range(1..=15);
                let v = rng.gen_bool(0.5);
                Sym::Bit(coder.code_bit_logp(v, logp))
            }
            1 => {
                let total = rng.gen_range(2..=1u32 << 24);
                let v = rng.gen_range(0..total);
                Sym::Uint(coder.code_uint(v, total), total)
            }
            2 => {
                let n = rng.gen_range(1..=16);
                let v = rng.gen_range(0..1u32 << n);
                Sym::Raw(coder.code_bits(v, n), n)
            }
            _ => {
                let v = rng.gen_range(0..4);
                Sym::Cdf(coder.code_cdf(v, &CDF))
            }
        };
        out.push(sym);
    }
    out
}

/// Round-trips `frames` random frames. Returns (mismatched frames, frames
/// whose packet size differs from the requested size).
pub fn entropy_frames(frames: u64) -> (usize, usize) {
    let mut sizes = ChaCha8Rng::seed_from_u64(1);
    let (mut bad, mut wrong_size) = (0, 0);
    for frame in 0..frames {
        let cap = sizes.gen_range(8..=400);
        let mut enc = RangeEncoder::new(cap);
        let sent = symbol_script(&mut enc, frame);
        let tell = enc.tell_frac();
        let Ok(bytes) = enc.finish() else {
            bad += 1;
            continue;
        };
        wrong_size += (bytes.len() != cap) as usize;
        let mut dec = RangeDecoder::new(&bytes);
        let got = symbol_script(&mut dec, frame);
        bad += (got != sent || dec.tell_frac() != tell) as usize;
    }
    (bad, wrong_size)
}

pub struct WasteStats {
    pub frames: usize,
    pub under_two_bits: usize,
    pub wrong_size: usize,
    /// Largest waste in eighth-bits.
    pub max_frac: i64,
}

/// Configurations the waste criterion is measured over: every frame size
/// at the nominal mono and stereo rates.
pub fn waste_configs() -> Vec<EncoderConfig> {
    let mut out = Vec::new();
    for duration in FrameDuration::ALL {
        for (channels, bitrate) in [(1, 32_000), (1, 64_000), (2, 64_000), (2, 128_000)] {
            out.push(EncoderConfig { channels, duration, bitrate, ..Default::default() });
        }
    }
    out
}

pub fn corpus_waste(configs: &[EncoderConfig], seconds: f64) -> WasteStats {
    let mut s = WasteStats { frames: 0, under_two_bits: 0, wrong_size: 0, max_frac: 0 };
    for cfg in configs {
        let n = cfg.frame_size() * cfg.channels;
        for signal in Signal::ALL {
            let pcm = generate(signal, (seconds * 48_000.0) as usize, cfg.channels);
            let mut enc = Encoder::new(cfg.clone()).unwrap();
            for chunk in pcm.chunks_exact(n) {
                let p = enc.encode_frame(chunk).unwrap();
                let waste = enc.last_info().unwrap().waste_frac();
                s.frames += 1;
                s.wrong_size += (p.len() != cfg.cbr_bytes()) as usize;
                s.under_two_bits += (waste < 16) as usize;
                s.max_frac = s.max_frac.max(waste);
            }
        }
    }
    s
}

fn random_params(rng: &mut ChaCha8Rng, channels: usize) -> AllocParams {
    let mut p = AllocParams { tilt: rng.gen_range(-5..=5), ..Default::default() };
    for b in p.boosts.iter_mut() {
        if rng.gen_bool(0.15) {
            *b = rng.gen_range(1..=6) * BOOST_QUANTUM;
        }
    }
    if channels == 2 {
        p.intensity = rng.gen_range(0..=NUM_BANDS);
        p.dual = rng.gen_bool(0.5);
    }
    p.skip = if rng.gen_bool(0.3) { rng.gen_range(0..4) } else { 0 };
    p
}

/// Allocation on both sides of a coded parameter set.
pub fn alloc_pair(seed: u64) -> (AllocResult, AllocResult) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration = FrameDuration::ALL[rng.gen_range(0..4)];
    let channels = rng.gen_range(1..=2);
    let bytes = rng.gen_range(2..=400usize);
    let cfg = AllocConfig::new(duration.frame_size(), channels);
    let params = random_params(&mut rng, channels);
    let total = bytes as i64 * 64;
    // a random prefix stands in for the earlier frame fields
    let prefix = rng.gen_range(0..=(bytes as u32 * 4).min(1 << 10));

    let mut enc = RangeEncoder::new(bytes);
    enc.encode_uint(prefix, (bytes as u32 * 4).min(1 << 10) + 1);
    let sent = code_alloc_params(&mut enc, &params, &cfg, total);
    let a = compute_allocation(&sent, &cfg, total - enc.tell_frac() as i64 - 8);
    let packet = enc.finish().unwrap();

    let mut dec = RangeDecoder::new(&packet);
    dec.decode_uint((bytes as u32 * 4).min(1 << 10) + 1);
    let got = code_alloc_params(&mut dec, &AllocParams::default(), &cfg, total);
    let b = compute_allocation(&got, &cfg, total - dec.tell_frac() as i64 - 8);
    (a, b)
}

pub fn alloc_mismatches(configs: u64) -> usize {
    (0..configs)
        .filter(|&s| {
            let (a, b) = alloc_pair(s);
            a != b
        })
        .count()
}

fn random_pitch(rng: &mut ChaCha8Rng) -> PitchParams {
    if rng.gen_bool(0.2) {
        PitchParams::off()
    } else {
        PitchParams::new(rng.gen_range(MIN_PERIOD..=MAX_PERIOD), rng.gen_range(1..=7), rng.gen_range(0..3))
    }
}

/// Prefilter followed by postfilter over `frames` chunks of `n` samples;
/// `varying` draws new parameters for every chunk.
pub fn comb_inversion(n: usize, frames: usize, varying: bool, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = noise(n * frames, seed, 10_000.0);
    let (mut pre, mut post) = (CombFilter::prefilter(), CombFilter::postfilter());
    let mut prev = PitchParams::off();
    let fixed = random_pitch(&mut rng);
    let mut y = Vec::with_capacity(x.len());
    for chunk in x.chunks(n) {
        let cur = if varying { random_pitch(&mut rng) } else { fixed };
        let mut c = chunk.to_vec();
        pre.process(&mut c, &prev, &cur, 0);
        post.process(&mut c, &prev, &cur, 0);
        y.extend(c);
        prev = cur;
    }
    rel_rms(&y, &x)
}

/// Largest norm change and inversion error of the spreading rotations and
/// TF transforms over every size, spread and legal TF factor.
pub fn orthogonal_errors() -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut norm_err, mut inv_err) = (0.0f64, 0.0f64);
    let mut track = |x: &[f64], y: &[f64], back: &[f64]| {
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        norm_err = norm_err.max((nx - ny).abs() / nx);
        for (a, b) in x.iter().zip(back) {
            inv_err = inv_err.max((a - b).abs());
        }
    };
    for n in 2..=64 {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for s in [Spread::Delta5, Spread::Delta10, Spread::Delta15] {
            for blocks in [1, 2, 4, 8] {
                if n % blocks != 0 {
                    continue;
                }
                let k = rng.gen_range(1..=2 * n as u32);
                let mut y = x.clone();
                spread(&mut y, k, s, blocks, true);
                let mut back = y.clone();
                spread(&mut back, k, s, blocks, false);
                track(&x, &y, &back);
            }
        }
        for blocks in [1, 2, 4, 8] {
            for tf in 0..=3 {
                if validate_tf(n, blocks, tf).is_err() || (blocks > 1 && n % blocks != 0) {
                    continue;
                }
                let mut y = x.clone();
                tf_transform(&mut y, tf);
                let coded = to_coding_order(&y, blocks, tf);
                let mut back = from_coding_order(&coded, blocks, tf);
                tf_transform(&mut back, tf);
                track(&x, &y, &back);
            }
        }
    }
    (norm_err, inv_err)
}

pub struct Fidelity {
    pub checked: usize,
    pub violations: usize,
    /// Worst error in units of the band's fine step.
    pub worst_steps: f64,
}

/// Band energies of every decoded frame against the encoder's measured
/// energies, in units of the fine quantizer step `2^-fine`.
pub fn energy_fidelity(cfg: &EncoderConfig, seconds: f64) -> Fidelity {
    let n = cfg.frame_size();
    let layout = BandLayout::new(n);
    let mut f = Fidelity { checked: 0, violations: 0, worst_steps: 0.0 };
    for signal in Signal::ALL {
        let pcm = generate(signal, (seconds * 48_000.0) as usize, cfg.channels);
        let mut enc = Encoder::new(cfg.clone()).unwrap();
        let mut dec = Decoder::new(cfg.duration, cfg.channels, cfg.seed).unwrap();
        for chunk in pcm.chunks_exact(n * cfg.channels) {
            let p = enc.encode_frame(chunk).unwrap();
            dec.decode_frame(Some(&p));
            let info = dec.last_info().unwrap();
            for c in 0..cfg.channels {
                let got = band_energy(&dec.spectrum()[c], &layout);
                for b in 0..info.coded_bands {
                    let want = enc.analysis_energy()[c * NUM_BANDS + b];
                    if want < ENERGY_MIN {
                        continue;
                    }
                    let steps = (got[b] - want.min(ENERGY_MAX)).abs() * (info.fine[b] as f64).exp2();
                    f.checked += 1;
                    f.violations += (steps > 1.0) as usize;
                    f.worst_steps = f.worst_steps.max(steps);
                }
            }
        }
    }
    f
}

pub struct Collapse {
    pub transient_frames: usize,
    pub holes: usize,
}

/// All-zero (band, short block) pairs in the decoded spectrum of the
/// castanet signal at 32 kb/s mono.
pub fn collapse_holes(policy: CollapsePolicy, seconds: f64) -> Collapse {
    let cfg = EncoderConfig { channels: 1, bitrate: 32_000, collapse: policy, ..Default::default() };
    let n = cfg.frame_size();
    let layout = BandLayout::new(n);
    let pcm = generate(Signal::Castanets, (seconds * 48_000.0) as usize, 1);
    let mut enc = Encoder::new(cfg.clone()).unwrap();
    let mut dec = Decoder::new(cfg.duration, 1, cfg.seed).unwrap();
    let mut out = Collapse { transient_frames: 0, holes: 0 };
    for chunk in pcm.chunks_exact(n) {
        let p = enc.encode_frame(chunk).unwrap();
        dec.decode_frame(Some(&p));
        let info = dec.last_info().unwrap();
        if !info.transient {
            continue;
        }
        out.transient_frames += 1;
        let blocks = n / 120;
        for b in 0..info.coded_bands {
            out.holes += band_holes(&dec.spectrum()[0][layout.range(b)], blocks).len();
        }
    }
    out
}

/// Mean LSD over the corpus for each cascade generation.
pub fn cascade_lsd(bitrate: u32, generations: usize, seconds: f64) -> Vec<f64> {
    let cfg = EncoderConfig { bitrate, ..Default::default() };
    let mut sum = vec![0.0; generations];
    for signal in Signal::ALL {
        let pcm = generate(signal, (seconds * 48_000.0) as usize, cfg.channels);
        for (g, m) in quality::cascade(&pcm, &cfg, generations).unwrap().iter().enumerate() {
            sum[g] += m.lsd;
        }
    }
    sum.iter().map(|v| v / Signal::ALL.len() as f64).collect()
}

pub struct FuzzStats {
    pub packets: usize,
    pub bad_samples: usize,
    pub bad_state: usize,
}

/// Decodes random packets through decoders of every frame size and
/// channel count, checking samples and decoder state.
pub fn fuzz_packets(packets: usize, seed: u64) -> FuzzStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut decoders: Vec<Decoder> = FrameDuration::ALL
        .into_iter()
        .flat_map(|d| [1, 2].map(|c| Decoder::new(d, c, 1).unwrap()))
        .collect();
    let mut s = FuzzStats { packets: 0, bad_samples: 0, bad_state: 0 };
    for i in 0..packets {
        let len = rng.gen_range(0..=300);
        let p: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let dec = &mut decoders[i % 8];
        let out = dec.decode_frame(Some(&p));
        s.packets += 1;
        s.bad_samples += out.iter().any(|v| !v.is_finite() || v.abs() > 4.0) as usize;
        let spectrum_ok = dec.spectrum().iter().flatten().all(|v| v.is_finite());
        let info_ok = dec.last_info().map_or(true, |info| {
            info.coded_bands <= NUM_BANDS
                && info.alloc.intensity <= NUM_BANDS
                && info.pitch.period >= MIN_PERIOD
                && info.pitch.period <= MAX_PERIOD
        });
        s.bad_state += !(spectrum_ok && info_ok) as usize;
    }
    s
}

/// Flips one raw-region bit in each of `trials` full random frames and
/// counts frames whose range-coded symbols decode differently. Returns
/// (trials, desyncs).
pub fn raw_flip_desyncs(trials: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut n, mut bad) = (0, 0);
    for seed in 0..trials {
        let cap = rng.gen_range(8..=200);
        let mut enc = RangeEncoder::new(cap);
        let sent = symbol_script(&mut enc, seed);
        let bytes = enc.finish().unwrap();
        let nraw: u32 = sent.iter().map(Sym::raw_bits).sum();
        if nraw == 0 {
            continue;
        }
        let bit = rng.gen_range(0..nraw) as usize;
        let mut flipped = bytes;
        flipped[cap - 1 - bit / 8] ^= 1 << (bit % 8);
        let mut dec = RangeDecoder::new(&flipped);
        let got = symbol_script(&mut dec, seed);
        n += 1;
        let same = got.len() == sent.len() && got.iter().zip(&sent).all(|(a, b)| a.range_part() == b.range_part());
        bad += !same as usize;
    }
    (n, bad)
}
