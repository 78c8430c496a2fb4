//! Bit allocation shared bit-exactly by encoder and decoder.
//!
//! Only a handful of parameters are transmitted (tilt, boosts, intensity,
//! dual stereo and explicit skips); everything else is derived from the
//! remaining budget with integer arithmetic.

use crate::bands::{BandLayout, NUM_BANDS};
use crate::energy::{fine_bits, K_FINE, MAX_FINE_BITS};
use crate::entropy::Coder;

pub const ROWS: usize = 8;
/// Interpolation steps between two prototype rows.
pub const FRAC_STEPS: i64 = 64;
pub const TILT_MAX: i32 = 5;
/// Boost increment in eighth-bits.
pub const BOOST_QUANTUM: u32 = 16;
const BOOST_LOGP: u32 = 6;

/// Prototype allocations in eighth-bits per sample, one row per quality step.
pub const PROTOTYPES: [[i64; NUM_BANDS]; ROWS] = [
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [10, 9, 9, 8, 7, 6, 6, 5, 4, 4, 3, 2, 1, 1, 0, 0, 0, 0, 0, 0, 0],
    [20, 19, 18, 17, 16, 14, 13, 12, 11, 10, 9, 8, 7, 6, 4, 3, 2, 1, 0, 0, 0],
    [32, 31, 29, 28, 27, 25, 24, 23, 21, 20, 19, 17, 16, 15, 13, 12, 11, 9, 8, 7, 5],
    [46, 44, 43, 41, 40, 38, 37, 35, 34, 32, 31, 29, 28, 26, 25, 23, 21, 20, 18, 17, 15],
    [64, 62, 61, 59, 58, 56, 54, 53, 51, 50, 48, 46, 45, 43, 42, 40, 38, 37, 35, 34, 32],
    [80, 79, 77, 76, 74, 73, 71, 70, 68, 67, 65, 64, 63, 61, 60, 58, 57, 55, 54, 52, 51],
    [96, 95, 94, 92, 91, 90, 89, 88, 86, 85, 84, 83, 82, 80, 79, 78, 77, 76, 74, 73, 72],
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocParams {
    /// Slope in 1/64 bit per sample per band, `-5..=5`.
    pub tilt: i32,
    /// Per-band boosts in eighth-bits (multiples of [`BOOST_QUANTUM`]).
    pub boosts: [u32; NUM_BANDS],
    /// First intensity-coded band; `NUM_BANDS` disables intensity stereo.
    pub intensity: usize,
    pub dual: bool,
    /// Bands to drop from the top beyond the automatic skips.
    pub skip: usize,
}

impl Default for AllocParams {
    fn default() -> Self {
        Self { tilt: 0, boosts: [0; NUM_BANDS], intensity: NUM_BANDS, dual: false, skip: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocConfig {
    pub layout: BandLayout,
    pub channels: usize,
}

impl AllocConfig {
    pub fn new(frame_size: usize, channels: usize) -> Self {
        Self { layout: BandLayout::new(frame_size), channels }
    }

    /// Channels whose shape is coded in `band`.
    pub fn shape_channels(&self, band: usize, intensity: usize) -> usize {
        if band >= intensity {
            1
        } else {
            self.channels
        }
    }

    /// Largest useful grant for a band, in eighth-bits.
    pub fn capacity(&self, band: usize, intensity: usize) -> i64 {
        let mult = self.shape_channels(band, intensity) as i64;
        let shape = crate::pvq::band_capacity(self.layout.width(band));
        // stereo angle or intensity inversion flag
        let side = match (self.channels, mult) {
            (2, 2) => 72,
            (2, _) => 8,
            _ => 0,
        };
        mult * shape + side + self.channels as i64 * MAX_FINE_BITS as i64 * 8
    }

    /// Grant below which a band is not worth coding.
    pub fn threshold(&self, band: usize, intensity: usize) -> i64 {
        let w = self.layout.width(band) as i64;
        (w / 2 + 3) * self.shape_channels(band, intensity) as i64
    }

    pub fn degrees_of_freedom(&self, band: usize, params: &AllocParams) -> usize {
        let w = self.layout.width(band);
        let mult = self.shape_channels(band, params.intensity);
        let coupled = self.channels == 2 && !params.dual && band < params.intensity && w > 2;
        w * mult + coupled as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocResult {
    /// Total grant per band (shape plus fine energy), eighth-bits.
    pub grant: Vec<i64>,
    /// Shape budget per band, eighth-bits.
    pub shape: Vec<i64>,
    /// Fine-energy bits per channel.
    pub fine: Vec<u32>,
    pub rounded_down: Vec<bool>,
    pub skipped: Vec<bool>,
    /// Number of bands coded from the bottom; the rest are skipped.
    pub coded_bands: usize,
    /// Boosts actually honoured.
    pub boosts: [u32; NUM_BANDS],
    /// Interpolation point, `row * FRAC_STEPS + frac`.
    pub quality: i64,
    /// Budget left unassigned; carried into the band loop.
    pub balance: i64,
}

fn band_grant(cfg: &AllocConfig, p: &AllocParams, boost: u32, b: usize, q: i64) -> i64 {
    let row = (q / FRAC_STEPS) as usize;
    let frac = q % FRAC_STEPS;
    let per_sample = if row + 1 >= ROWS {
        PROTOTYPES[ROWS - 1][b] * FRAC_STEPS
    } else {
        PROTOTYPES[row][b] * (FRAC_STEPS - frac) + PROTOTYPES[row + 1][b] * frac
    };
    let w = cfg.layout.width(b) as i64;
    let mult = cfg.shape_channels(b, p.intensity) as i64;
    let mut base = (per_sample * w * mult) >> 6;
    if base > 0 {
        base = (base + ((p.tilt as i64 * (b as i64 - 10) * w * mult) >> 3)).max(0);
    }
    (base + boost as i64).min(cfg.capacity(b, p.intensity))
}

fn total(cfg: &AllocConfig, p: &AllocParams, boosts: &[u32; NUM_BANDS], end: usize, q: i64) -> i64 {
    (0..end).map(|b| band_grant(cfg, p, boosts[b], b, q)).sum()
}

/// Highest interpolation point whose total fits `budget`.
fn search(cfg: &AllocConfig, p: &AllocParams, boosts: &[u32; NUM_BANDS], end: usize, budget: i64) -> i64 {
    let top = (ROWS as i64 - 1) * FRAC_STEPS;
    let (mut lo, mut hi) = (0i64, top);
    if total(cfg, p, boosts, end, top) <= budget {
        return top;
    }
    while lo < hi {
        let mid = (lo + hi + 1) / 2;
        if total(cfg, p, boosts, end, mid) <= budget {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// Computes the per-band budgets for `budget` eighth-bits.
pub fn compute_allocation(params: &AllocParams, cfg: &AllocConfig, budget: i64) -> AllocResult {
    let budget = budget.max(0);
    let mut boosts = params.boosts;
    for (b, boost) in boosts.iter_mut().enumerate() {
        *boost = (*boost as i64).min(cfg.capacity(b, params.intensity)) as u32;
    }
    // boosts the budget cannot carry even at the lowest quality are dropped
    // from the top
    for b in (0..NUM_BANDS).rev() {
        if total(cfg, params, &boosts, NUM_BANDS, 0) <= budget {
            break;
        }
        boosts[b] = 0;
    }

    let mut end = NUM_BANDS;
    let mut q = search(cfg, params, &boosts, end, budget);
    while end > 0 && band_grant(cfg, params, boosts[end - 1], end - 1, q) < cfg.threshold(end - 1, params.intensity) {
        end -= 1;
        boosts[end] = 0;
        q = search(cfg, params, &boosts, end, budget);
    }
    if params.skip > 0 && end > 0 {
        let drop = params.skip.min(end);
        for boost in &mut boosts[end - drop..end] {
            *boost = 0;
        }
        end -= drop;
        q = search(cfg, params, &boosts, end, budget);
    }

    let mut res = AllocResult {
        grant: vec![0; NUM_BANDS],
        shape: vec![0; NUM_BANDS],
        fine: vec![0; NUM_BANDS],
        rounded_down: vec![false; NUM_BANDS],
        skipped: vec![true; NUM_BANDS],
        coded_bands: end,
        boosts,
        quality: q,
        balance: 0,
    };
    let ch = cfg.channels as i64;
    for b in 0..end {
        let g = band_grant(cfg, params, boosts[b], b, q);
        let (mut fb, down) = fine_bits(g as i32, cfg.degrees_of_freedom(b, params), K_FINE);
        fb = fb.min((g / (8 * ch)) as u32);
        res.grant[b] = g;
        res.fine[b] = fb;
        res.rounded_down[b] = down;
        res.shape[b] = g - fb as i64 * 8 * ch;
        res.skipped[b] = false;
    }
    res.balance = budget - res.grant.iter().sum::<i64>();
    res
}

/// Codes the allocation parameters, stopping short of `limit` eighth-bits.
/// Returns the parameters the decoder will see.
pub fn code_alloc_params<C: Coder>(coder: &mut C, params: &AllocParams, cfg: &AllocConfig, limit: i64) -> AllocParams {
    let fits = |c: &C, cost: i64| c.tell_frac() as i64 + cost <= limit;
    let mut out = AllocParams::default();

    if fits(coder, 32) {
        let t = (params.tilt.clamp(-TILT_MAX, TILT_MAX) + TILT_MAX) as u32;
        out.tilt = coder.code_uint(t, 2 * TILT_MAX as u32 + 1) as i32 - TILT_MAX;
    }

    let mut logp = BOOST_LOGP;
    for b in 0..NUM_BANDS {
        let want = params.boosts[b] / BOOST_QUANTUM * BOOST_QUANTUM;
        let cap = cfg.capacity(b, NUM_BANDS) as u32;
        let mut boost = 0u32;
        let mut l = logp;
        while boost < cap && fits(coder, 8 * l as i64) {
            if !coder.code_bit_logp(want > boost, l) {
                break;
            }
            boost += BOOST_QUANTUM;
            l = 1;
        }
        if boost > 0 {
            logp = (logp - 1).max(2);
        }
        out.boosts[b] = boost;
    }

    if cfg.channels == 2 {
        if fits(coder, 40) {
            let i = params.intensity.min(NUM_BANDS) as u32;
            out.intensity = coder.code_uint(i, NUM_BANDS as u32 + 1) as usize;
        }
        if fits(coder, 8) {
            out.dual = coder.code_bit_logp(params.dual, 1);
        }
    }

    while out.skip < NUM_BANDS && fits(coder, 8) {
        if !coder.code_bit_logp(params.skip > out.skip, 1) {
            break;
        }
        out.skip += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{RangeDecoder, RangeEncoder};

    #[test]
    fn prototypes_monotone() {
        for r in 1..ROWS {
            for b in 0..NUM_BANDS {
                assert!(PROTOTYPES[r][b] >= PROTOTYPES[r - 1][b]);
                if b > 0 {
                    assert!(PROTOTYPES[r][b] <= PROTOTYPES[r][b - 1]);
                }
            }
        }
    }

    #[test]
    fn starvation_skips_everything() {
        let cfg = AllocConfig::new(960, 1);
        let r = compute_allocation(&AllocParams::default(), &cfg, 0);
        assert_eq!(r.coded_bands, 0);
        assert!(r.skipped.iter().all(|&s| s));
    }

    #[test]
    fn grants_fit_budget() {
        let cfg = AllocConfig::new(960, 2);
        for budget in [100, 1000, 5000, 20_000, 200_000] {
            let r = compute_allocation(&AllocParams::default(), &cfg, budget);
            assert!(r.grant.iter().sum::<i64>() <= budget);
            assert_eq!(r.balance, budget - r.grant.iter().sum::<i64>());
        }
    }

    #[test]
    fn params_roundtrip() {
        let cfg = AllocConfig::new(960, 2);
        let mut p = AllocParams { tilt: -3, intensity: 14, dual: true, skip: 2, ..Default::default() };
        p.boosts[19] = 48;
        p.boosts[2] = 16;
        let mut enc = RangeEncoder::new(64);
        let sent = code_alloc_params(&mut enc, &p, &cfg, 64 * 64);
        assert_eq!(sent, p);
        let bytes = enc.finish().unwrap();
        let mut dec = RangeDecoder::new(&bytes);
        assert_eq!(code_alloc_params(&mut dec, &AllocParams::default(), &cfg, 64 * 64), p);
    }
}
