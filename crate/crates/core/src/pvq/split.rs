//! Recursive band splitting and the per-band shape coder.

use std::sync::OnceLock;

use super::{choose_k, code_vector, normalized, pvq_search};
use crate::bands::{noise_vector, norm, normalize_band, spread, Lcg, Spread};
use crate::energy::{fine_bits, K_FINE};
use crate::entropy::Coder;
use crate::mathops::bitexact_cos;

/// Budgets above this many eighth-bits are split in two.
pub const SPLIT_BITS: i64 = 32 * 8;
pub const MAX_DEPTH: usize = 4;
/// Widths whose capacity is precomputed.
const CAPACITY_TABLE: usize = 1024;

/// State shared by all bands of one frame.
pub struct BandCoding<'a> {
    pub spread: Spread,
    pub rng: &'a mut Lcg,
    /// Deepest split level reached so far.
    pub max_depth: usize,
    /// Stereo angles coded so far, Q14.
    pub angles: Vec<i32>,
}

impl<'a> BandCoding<'a> {
    pub fn new(spread: Spread, rng: &'a mut Lcg) -> Self {
        Self { spread, rng, max_depth: 0, angles: Vec::new() }
    }
}

/// Resolution of an angle coded with `budget` eighth-bits over `n` values:
/// `qn + 1` uniform levels spanning `[0, pi/2]`. Zero means no angle fits.
pub(crate) fn angle_levels(budget: i64, n: usize, min_bits: u32) -> u32 {
    let (mut qb, _) = fine_bits(budget.clamp(0, i32::MAX as i64) as i32, n, K_FINE);
    qb = qb.clamp(min_bits, 8);
    while qb > 0 && 8 * (qb as i64 + 1) > budget {
        qb -= 1;
    }
    if qb == 0 {
        0
    } else {
        1 << qb
    }
}

/// Most eighth-bits a band of `n` coefficients can absorb, per coded
/// channel, through splitting down to capped leaves.
pub fn band_capacity(n: usize) -> i64 {
    static TABLE: OnceLock<Vec<i64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| (0..=CAPACITY_TABLE).map(|n| split_capacity(n, 0)).collect());
    table.get(n).copied().unwrap_or_else(|| split_capacity(n, 0))
}

fn split_capacity(n: usize, depth: usize) -> i64 {
    if n < 2 || depth >= MAX_DEPTH {
        return super::pulse_cost(n, choose_k(n, i64::MAX)) as i64;
    }
    let angle = crate::mathops::log2_frac_ceil(257, 3) as i64;
    angle + split_capacity(n / 2, depth + 1) + split_capacity(n - n / 2, depth + 1)
}

/// Quantizes `theta` in `[0, pi/2]` to one of `qn + 1` levels.
pub(crate) fn quantize_angle(theta: f64, qn: u32) -> u32 {
    let t = theta.clamp(0.0, std::f64::consts::FRAC_PI_2);
    ((t / std::f64::consts::FRAC_PI_2 * qn as f64).round() as u32).min(qn)
}

/// Angle index in Q14 where 16384 is a right angle.
pub(crate) fn itheta_q14(itheta: u32, qn: u32) -> i32 {
    (itheta as i64 * 16384 / qn as i64) as i32
}

/// Cosine and sine gains of a Q14 angle, derived from integers only.
pub(crate) fn angle_gains(q14: i32) -> (f64, f64) {
    match q14 {
        0 => (1.0, 0.0),
        16384 => (0.0, 1.0),
        _ => (bitexact_cos(q14) as f64 / 32768.0, bitexact_cos(16384 - q14) as f64 / 32768.0),
    }
}

fn code_leaf<C: Coder>(coder: &mut C, x: &[f64], budget: i64, blocks: usize, ctx: &mut BandCoding<'_>) -> Vec<f64> {
    let n = x.len();
    let k = choose_k(n, budget);
    if k == 0 {
        return noise_vector(n, ctx.rng);
    }
    let mut target = Vec::new();
    if C::ENCODER {
        let mut xs = x.to_vec();
        spread(&mut xs, k, ctx.spread, blocks, true);
        target = pvq_search(&xs, k);
    }
    let y = code_vector(coder, &target, n, k);
    let mut v = normalized(&y);
    spread(&mut v, k, ctx.spread, blocks, false);
    v
}

/// Codes `x` (any norm) with `budget` eighth-bits and returns a unit-norm
/// direction estimate.
pub(crate) fn partition<C: Coder>(
    coder: &mut C,
    x: &[f64],
    budget: i64,
    blocks: usize,
    depth: usize,
    ctx: &mut BandCoding<'_>,
) -> Vec<f64> {
    let n = x.len();
    ctx.max_depth = ctx.max_depth.max(depth);
    if budget <= SPLIT_BITS || n < 2 || depth >= MAX_DEPTH {
        return code_leaf(coder, x, budget, blocks, ctx);
    }
    let n1 = n / 2;
    let (x1, x2) = x.split_at(n1);
    let start = coder.tell_frac() as i64;
    let qn = angle_levels(budget, n, 1);
    let want = if C::ENCODER { quantize_angle(norm(x2).atan2(norm(x1)), qn) } else { 0 };
    let itheta = coder.code_uint(want, qn + 1);
    let q14 = itheta_q14(itheta, qn);
    let b = budget - (coder.tell_frac() as i64 - start);

    let mut mbits = super::mid_allocation(b, n1, q14);
    if blocks > 1 && q14 > 0 && q14 < 16384 {
        // later halves of a transient band carry the attack
        mbits -= (b >> 4).min(mbits);
    }
    let mut sbits = b - mbits;
    let hb = (blocks / 2).max(1);
    let (g1, g2) = angle_gains(q14);

    let (mut y1, mut y2);
    if mbits >= sbits {
        let before = coder.tell_frac() as i64;
        y1 = if g1 > 0.0 { partition(coder, x1, mbits, hb, depth + 1, ctx) } else { vec![0.0; n1] };
        sbits += mbits - (coder.tell_frac() as i64 - before);
        y2 = if g2 > 0.0 { partition(coder, x2, sbits, hb, depth + 1, ctx) } else { vec![0.0; n - n1] };
    } else {
        let before = coder.tell_frac() as i64;
        y2 = if g2 > 0.0 { partition(coder, x2, sbits, hb, depth + 1, ctx) } else { vec![0.0; n - n1] };
        mbits += sbits - (coder.tell_frac() as i64 - before);
        y1 = if g1 > 0.0 { partition(coder, x1, mbits, hb, depth + 1, ctx) } else { vec![0.0; n1] };
    }
    y1.iter_mut().for_each(|v| *v *= g1);
    y2.iter_mut().for_each(|v| *v *= g2);
    y1.extend(y2);
    y1
}

/// Codes one normalized band given in coding order.
///
/// Returns `None` when the budget cannot buy a single pulse; the caller then
/// fills the band by folding.
pub fn code_band<C: Coder>(
    coder: &mut C,
    x: &[f64],
    blocks: usize,
    budget: i64,
    ctx: &mut BandCoding<'_>,
) -> Option<Vec<f64>> {
    if budget <= SPLIT_BITS && choose_k(x.len(), budget) == 0 {
        return None;
    }
    let mut v = partition(coder, x, budget, blocks, 0, ctx);
    if normalize_band(&mut v).is_err() {
        v = noise_vector(x.len(), ctx.rng);
    }
    Some(v)
}
