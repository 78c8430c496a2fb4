//! Stereo coupling: dual (independent), mid/side by angle, and intensity.

use super::choose_k;
use super::split::{angle_gains, angle_levels, itheta_q14, partition, quantize_angle, BandCoding, SPLIT_BITS};
use crate::bands::{noise_vector, norm, normalize_band};
use crate::entropy::Coder;
use crate::mathops::{bitexact_cos, bitexact_log2tan, frac_mul16};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StereoMode {
    Dual,
    MidSide,
    Intensity,
}

fn unit_or_zero(mut v: Vec<f64>) -> Vec<f64> {
    if normalize_band(&mut v).is_err() {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
    v
}

/// Mid and side directions of two unit vectors and the angle
/// `atan(||S|| / ||M||)`. A vanished signal comes back as zeros.
pub fn ms_couple(l: &[f64], r: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let m: Vec<f64> = l.iter().zip(r).map(|(a, b)| (a + b) / 2.0).collect();
    let s: Vec<f64> = l.iter().zip(r).map(|(a, b)| (a - b) / 2.0).collect();
    let theta = norm(&s).atan2(norm(&m));
    (unit_or_zero(m), unit_or_zero(s), theta)
}

/// Inverse of [`ms_couple`]; each channel is renormalized.
pub fn ms_decouple(m: &[f64], s: &[f64], theta: f64) -> (Vec<f64>, Vec<f64>) {
    decouple_gains(m, s, theta.cos(), theta.sin())
}

fn decouple_gains(m: &[f64], s: &[f64], gm: f64, gs: f64) -> (Vec<f64>, Vec<f64>) {
    let l: Vec<f64> = m.iter().zip(s).map(|(a, b)| gm * a + gs * b).collect();
    let r: Vec<f64> = m.iter().zip(s).map(|(a, b)| gm * a - gs * b).collect();
    (unit_or_zero(l), unit_or_zero(r))
}

/// Eighth-bits given to the mid (or first half) out of `a`, for a Q14 angle
/// where 16384 is a right angle and `n` samples per part.
pub fn mid_allocation(a: i64, n: usize, itheta_q14: i32) -> i64 {
    if itheta_q14 <= 0 {
        return a.max(0);
    }
    if itheta_q14 >= 16384 {
        return 0;
    }
    let imid = bitexact_cos(itheta_q14);
    let iside = bitexact_cos(16384 - itheta_q14);
    let delta = frac_mul16(((n as i32 - 1) << 7).min(32767), bitexact_log2tan(iside, imid)) as i64;
    ((a - delta) / 2).clamp(0, a.max(0))
}

/// Energy-weighted mid for intensity coding, and whether the right channel
/// is inverted.
pub fn intensity_mid(l: &[f64], r: &[f64], el: f64, er: f64) -> (Vec<f64>, bool) {
    let dot: f64 = l.iter().zip(r).map(|(a, b)| a * b).sum();
    let invert = dot < 0.0;
    let sign = if invert { -1.0 } else { 1.0 };
    let m: Vec<f64> = l.iter().zip(r).map(|(a, b)| el * a + sign * er * b).collect();
    (unit_or_zero(m), invert)
}

fn finish(v: Vec<f64>, ctx: &mut BandCoding<'_>) -> Vec<f64> {
    let n = v.len();
    let v = unit_or_zero(v);
    if v.iter().all(|&x| x == 0.0) {
        noise_vector(n, ctx.rng)
    } else {
        v
    }
}

fn code_mono<C: Coder>(
    coder: &mut C,
    x: &[f64],
    blocks: usize,
    budget: i64,
    ctx: &mut BandCoding<'_>,
) -> Option<Vec<f64>> {
    super::code_band(coder, x, blocks, budget, ctx)
}

/// Codes one stereo band. `l` and `r` are unit-norm in coding order (ignored
/// when decoding) and `amps` are the linear band amplitudes. A channel comes
/// back as `None` when it received nothing and must be folded.
#[allow(clippy::too_many_arguments)]
pub fn code_band_stereo<C: Coder>(
    coder: &mut C,
    l: &[f64],
    r: &[f64],
    amps: (f64, f64),
    mode: StereoMode,
    blocks: usize,
    budget: i64,
    ctx: &mut BandCoding<'_>,
) -> (Option<Vec<f64>>, Option<Vec<f64>>) {
    let n = l.len();
    match mode {
        StereoMode::Dual => {
            let start = coder.tell_frac() as i64;
            let a = code_mono(coder, l, blocks, budget / 2, ctx);
            let left = budget - (coder.tell_frac() as i64 - start);
            let b = code_mono(coder, r, blocks, left, ctx);
            (a, b)
        }
        StereoMode::Intensity => {
            if budget < 8 || (budget - 8 <= SPLIT_BITS && choose_k(n, budget - 8) == 0) {
                return (None, None);
            }
            let (m, inv) = if C::ENCODER { intensity_mid(l, r, amps.0, amps.1) } else { (vec![0.0; n], false) };
            let start = coder.tell_frac() as i64;
            let inv = coder.code_bit_logp(inv, 1);
            let left = budget - (coder.tell_frac() as i64 - start);
            match code_mono(coder, &m, blocks, left, ctx) {
                Some(v) => {
                    let other = if inv { v.iter().map(|x| -x).collect() } else { v.clone() };
                    (Some(v), Some(other))
                }
                None => (None, None),
            }
        }
        StereoMode::MidSide => {
            if budget <= SPLIT_BITS && choose_k(n, budget) == 0 {
                return (None, None);
            }
            let (m, s, theta) = if C::ENCODER { ms_couple(l, r) } else { (vec![0.0; n], vec![0.0; n], 0.0) };
            let start = coder.tell_frac() as i64;
            let qn = angle_levels(budget, n, 0);
            let q14 = if qn == 0 {
                0
            } else {
                let it = coder.code_uint(quantize_angle(theta, qn), qn + 1);
                itheta_q14(it, qn)
            };
            ctx.angles.push(q14);
            let b = budget - (coder.tell_frac() as i64 - start);
            let (gm, gs) = angle_gains(q14);

            let (mh, sh) = if n == 2 && q14 > 0 && q14 < 16384 {
                // the side of a two-sample band is orthogonal to the mid, up
                // to its sign
                let sign_cost = if b >= 8 { 8 } else { 0 };
                let mh = finish(partition(coder, &m, b - sign_cost, blocks, 0, ctx), ctx);
                let perp = [-mh[1], mh[0]];
                let want = s[0] * perp[0] + s[1] * perp[1] < 0.0;
                let neg = sign_cost > 0 && coder.code_bits(want as u32, 1) == 1;
                let sgn = if neg { -1.0 } else { 1.0 };
                (mh, vec![sgn * perp[0], sgn * perp[1]])
            } else {
                let mut mbits = mid_allocation(b, n, q14);
                let mut sbits = b - mbits;
                let code = |coder: &mut C, x: &[f64], bits: i64, g: f64, ctx: &mut BandCoding<'_>| {
                    if g > 0.0 {
                        finish(partition(coder, x, bits, blocks, 0, ctx), ctx)
                    } else {
                        vec![0.0; n]
                    }
                };
                if mbits >= sbits {
                    let before = coder.tell_frac() as i64;
                    let mh = code(coder, &m, mbits, gm, ctx);
                    sbits += mbits - (coder.tell_frac() as i64 - before);
                    let sh = code(coder, &s, sbits, gs, ctx);
                    (mh, sh)
                } else {
                    let before = coder.tell_frac() as i64;
                    let sh = code(coder, &s, sbits, gs, ctx);
                    mbits += sbits - (coder.tell_frac() as i64 - before);
                    let mh = code(coder, &m, mbits, gm, ctx);
                    (mh, sh)
                }
            };
            let (lh, rh) = decouple_gains(&mh, &sh, gm, gs);
            (Some(finish(lh, ctx)), Some(finish(rh, ctx)))
        }
    }
}
