//! Band-energy quantization in three stages.
//!
//! Energies live in the log2 domain (one unit is 6.02 dB). The coarse stage
//! codes whole units with a two-dimensional predictor and a Laplace model,
//! the fine stage spends the allocation's fine bits as raw bits, and the
//! final stage hands leftover bits out one at a time.

use crate::bands::NUM_BANDS;
use crate::entropy::{Coder, RangeDecoder, RangeEncoder};
use crate::mathops::log2_frac_floor;
use crate::transform::FrameDuration;

pub const ENERGY_MIN: f64 = -9.0;
pub const ENERGY_MAX: f64 = 20.0;
/// Fine allocation offset (2.1 bits) in eighth-bits.
pub const K_FINE: i32 = 17;
pub const MAX_FINE_BITS: u32 = 8;

const LAPLACE_FT: u32 = 1 << 15;
const LAPLACE_MINP: u32 = 1;
const LAPLACE_NMIN: u32 = 16;

/// Laplace model: probability of zero (Q15) and geometric decay (Q14).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Laplace {
    pub fs0: u32,
    pub decay: u32,
}

/// Per-band models for inter-frame and intra-frame prediction, produced by
/// `examples/train_laplace.rs` on the bundled corpus.
pub const LAPLACE_INTER: [Laplace; NUM_BANDS] = [
    Laplace { fs0: 3025, decay: 10755 },
    Laplace { fs0: 3281, decay: 9743 },
    Laplace { fs0: 4391, decay: 9199 },
    Laplace { fs0: 5819, decay: 7606 },
    Laplace { fs0: 6824, decay: 8673 },
    Laplace { fs0: 7516, decay: 7844 },
    Laplace { fs0: 8741, decay: 8016 },
    Laplace { fs0: 11603, decay: 8202 },
    Laplace { fs0: 12755, decay: 6384 },
    Laplace { fs0: 11905, decay: 6650 },
    Laplace { fs0: 12510, decay: 6528 },
    Laplace { fs0: 12699, decay: 6115 },
    Laplace { fs0: 13044, decay: 5721 },
    Laplace { fs0: 12877, decay: 5581 },
    Laplace { fs0: 12996, decay: 5217 },
    Laplace { fs0: 13448, decay: 4645 },
    Laplace { fs0: 13708, decay: 4168 },
    Laplace { fs0: 13989, decay: 3928 },
    Laplace { fs0: 15646, decay: 3492 },
    Laplace { fs0: 15163, decay: 3559 },
    Laplace { fs0: 15373, decay: 3403 },
];
pub const LAPLACE_INTRA: [Laplace; NUM_BANDS] = [
    Laplace { fs0: 1000, decay: 14442 },
    Laplace { fs0: 2754, decay: 9101 },
    Laplace { fs0: 8141, decay: 8126 },
    Laplace { fs0: 10414, decay: 8581 },
    Laplace { fs0: 14477, decay: 8002 },
    Laplace { fs0: 11637, decay: 9256 },
    Laplace { fs0: 12751, decay: 9460 },
    Laplace { fs0: 14379, decay: 7359 },
    Laplace { fs0: 11342, decay: 6780 },
    Laplace { fs0: 11702, decay: 8743 },
    Laplace { fs0: 13967, decay: 6413 },
    Laplace { fs0: 13800, decay: 4121 },
    Laplace { fs0: 12621, decay: 3413 },
    Laplace { fs0: 10972, decay: 3837 },
    Laplace { fs0: 14314, decay: 3469 },
    Laplace { fs0: 15647, decay: 3439 },
    Laplace { fs0: 13227, decay: 3203 },
    Laplace { fs0: 17522, decay: 3777 },
    Laplace { fs0: 12347, decay: 3536 },
    Laplace { fs0: 10419, decay: 3788 },
    Laplace { fs0: 13355, decay: 3382 },
];

fn laplace_freq1(fs0: u32, decay: u32) -> u32 {
    let ft = LAPLACE_FT - LAPLACE_MINP * (2 * LAPLACE_NMIN) - fs0;
    (ft * (16384 - decay)) >> 15
}

/// Encodes `value`; values beyond the model's reach are clamped to the
/// largest representable magnitude, which is returned.
pub fn laplace_encode(enc: &mut RangeEncoder, value: i32, model: Laplace) -> i32 {
    let mut fs = model.fs0;
    let decay = model.decay;
    let mut fl = 0u32;
    let mut out = value;
    if value != 0 {
        let s: i32 = if value < 0 { -1 } else { 0 };
        let val = (value + s) ^ s;
        fl = fs;
        fs = laplace_freq1(fs, decay);
        let mut i = 1;
        while fs > 0 && i < val {
            fs *= 2;
            fl += fs + 2 * LAPLACE_MINP;
            fs = (fs * decay) >> 15;
            i += 1;
        }
        if fs == 0 {
            let mut ndi_max = (LAPLACE_FT - fl + LAPLACE_MINP - 1) as i32;
            ndi_max = (ndi_max - s) >> 1;
            let di = (val - i).min(ndi_max - 1);
            fl += ((2 * di + 1 + s) as u32) * LAPLACE_MINP;
            fs = LAPLACE_MINP.min(LAPLACE_FT - fl);
            out = (i + di + s) ^ s;
        } else {
            fs += LAPLACE_MINP;
            if s == 0 {
                fl += fs;
            }
        }
    }
    enc.encode(fl, fl + fs, LAPLACE_FT);
    out
}

pub fn laplace_decode(dec: &mut RangeDecoder<'_>, model: Laplace) -> i32 {
    let mut fs = model.fs0;
    let decay = model.decay;
    let mut val = 0i32;
    let fm = dec.decode(LAPLACE_FT);
    let mut fl = 0u32;
    if fm >= fs {
        val += 1;
        fl = fs;
        fs = laplace_freq1(fs, decay) + LAPLACE_MINP;
        while fs > LAPLACE_MINP && fm >= fl + 2 * fs {
            fs *= 2;
            fl += fs;
            fs = (((fs - 2 * LAPLACE_MINP) * decay) >> 15) + LAPLACE_MINP;
            val += 1;
        }
        if fs <= LAPLACE_MINP {
            let di = (fm - fl) >> 1;
            val += di as i32;
            fl += 2 * di * LAPLACE_MINP;
        }
        if fm < fl + fs {
            val = -val;
        } else {
            fl += fs;
        }
    }
    dec.update(fl, (fl + fs).min(LAPLACE_FT), LAPLACE_FT);
    val
}

/// Prediction coefficients `(alpha, beta)` of the coarse quantizer.
pub fn prediction_coefs(duration: FrameDuration, interframe: bool) -> (f64, f64) {
    if !interframe {
        return (0.0, 0.15);
    }
    match duration {
        FrameDuration::Ms2_5 => (0.90, 0.92),
        FrameDuration::Ms5 => (0.80, 0.85),
        FrameDuration::Ms10 => (0.65, 0.70),
        FrameDuration::Ms20 => (0.50, 0.55),
    }
}

const SMALL_CDF: [u32; 4] = [0, 2, 3, 4];

/// Codes the coarse energies of one frame.
///
/// `target` holds the encoder's energies (`channels * NUM_BANDS`, band
/// index fastest) and is ignored when decoding. `prev` is the previous
/// frame's quantized energies and is replaced by this frame's coarse
/// result. `budget` is the frame size in eighth-bits; symbols degrade to
/// cheaper models when it runs low. Returns the coded residuals.
pub fn code_coarse<C: Coder>(
    coder: &mut C,
    target: Option<&[f64]>,
    prev: &mut [f64],
    interframe: bool,
    duration: FrameDuration,
    channels: usize,
    budget: i64,
) -> Vec<i32> {
    let (alpha, beta) = prediction_coefs(duration, interframe);
    let models = if interframe { &LAPLACE_INTER } else { &LAPLACE_INTRA };
    let mut acc = [0.0f64; 2];
    let mut residuals = vec![0; channels * NUM_BANDS];
    for b in 0..NUM_BANDS {
        for c in 0..channels {
            let i = c * NUM_BANDS + b;
            let pred = alpha * prev[i] + acc[c];
            let want = match target {
                Some(t) if C::ENCODER => {
                    let e = t[i].clamp(ENERGY_MIN, ENERGY_MAX);
                    (e - pred).round() as i32
                }
                _ => 0,
            };
            let left = budget - coder.tell_frac() as i64;
            let qi = if left >= 15 * 8 {
                coder.code_laplace(want, models[b])
            } else if left >= 2 * 8 {
                let w = want.clamp(-1, 1);
                let sym = match w {
                    0 => 0,
                    -1 => 1,
                    _ => 2,
                };
                match coder.code_cdf(sym, &SMALL_CDF) {
                    0 => 0,
                    1 => -1,
                    _ => 1,
                }
            } else if left >= 8 {
                if coder.code_bit_logp(want < 0, 1) {
                    -1
                } else {
                    0
                }
            } else {
                -1
            };
            residuals[i] = qi;
            prev[i] = (pred + qi as f64).clamp(ENERGY_MIN, ENERGY_MAX);
            acc[c] += (1.0 - beta) * qi as f64;
        }
    }
    residuals
}

/// Fine-energy bits per channel for a band with allocation `a` (eighth-bits)
/// and `n_dof` degrees of freedom. Also reports whether the value was
/// rounded down.
pub fn fine_bits(a: i32, n_dof: usize, k_fine: i32) -> (u32, bool) {
    if a <= 0 || n_dof == 0 {
        return (0, false);
    }
    let n = n_dof as i32;
    let mut v = a / n + log2_frac_floor(n_dof as u128, 3) as i32 / 2 - k_fine;
    if n_dof == 2 {
        v += 8;
    }
    let bits = (v + 4).div_euclid(8).clamp(0, MAX_FINE_BITS as i32) as u32;
    (bits, v.rem_euclid(8) < 4)
}

fn fine_bias(bits: u32) -> f64 {
    match bits {
        1 => 1.0 / 16.0,
        2 => 1.0 / 32.0,
        _ => 0.0,
    }
}

/// Refines `quant` with `fine[b]` raw bits per channel.
pub fn code_fine<C: Coder>(
    coder: &mut C,
    target: Option<&[f64]>,
    quant: &mut [f64],
    fine: &[u32],
    channels: usize,
) {
    for (b, &bits) in fine.iter().enumerate() {
        if bits == 0 {
            continue;
        }
        let levels = 1u32 << bits;
        for c in 0..channels {
            let i = c * NUM_BANDS + b;
            let want = match target {
                Some(t) if C::ENCODER => {
                    let frac = t[i].clamp(ENERGY_MIN, ENERGY_MAX) - quant[i] + 0.5;
                    ((frac * levels as f64).floor() as i64).clamp(0, levels as i64 - 1) as u32
                }
                _ => 0,
            };
            let q = coder.code_bits(want, bits);
            quant[i] += (q as f64 + 0.5) / levels as f64 - 0.5 + fine_bias(bits);
        }
    }
}

/// Order in which leftover bits refine band energies: bands whose fine
/// allocation was rounded down first, then the rest, ascending within each
/// class, one entry per channel.
pub fn final_order(fine: &[u32], rounded_down: &[bool], channels: usize) -> Vec<(usize, usize)> {
    let mut order = Vec::new();
    for class in [true, false] {
        for b in 0..fine.len() {
            if rounded_down[b] == class && fine[b] < MAX_FINE_BITS {
                for c in 0..channels {
                    order.push((b, c));
                }
            }
        }
    }
    order
}

/// Refinement passes over the band energies once shapes are coded.
pub const FINAL_PASSES: u32 = 8;

/// Spends `leftover` eighth-bits on one-bit energy refinements: a first pass
/// in [`final_order`], then further passes over every band, each halving the
/// step. Returns the number of bits used.
pub fn code_final<C: Coder>(
    coder: &mut C,
    target: Option<&[f64]>,
    quant: &mut [f64],
    fine: &[u32],
    rounded_down: &[bool],
    channels: usize,
    mut leftover: i64,
) -> usize {
    let mut seq: Vec<(usize, usize, u32)> =
        final_order(fine, rounded_down, channels).into_iter().map(|(b, c)| (b, c, 0)).collect();
    for pass in 1..FINAL_PASSES {
        for b in 0..fine.len() {
            for c in 0..channels {
                seq.push((b, c, pass));
            }
        }
    }
    let mut used = 0;
    for (b, c, pass) in seq {
        if leftover < 8 {
            break;
        }
        let i = c * NUM_BANDS + b;
        let want = match target {
            Some(t) if C::ENCODER => t[i].clamp(ENERGY_MIN, ENERGY_MAX) >= quant[i],
            _ => false,
        };
        let bit = coder.code_bits(want as u32, 1);
        let step = 0.5f64.powi((fine[b] + pass) as i32 + 2);
        quant[i] += if bit == 1 { step } else { -step };
        leftover -= 8;
        used += 1;
    }
    used
}
