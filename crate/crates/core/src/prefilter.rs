//! Pitch prefilter and postfilter.
//!
//! The encoder attenuates the harmonic peaks of periodic signals with a
//! five-tap comb before the transform; the decoder applies the exact inverse
//! IIR comb after it, so quantization noise between harmonics is shaped
//! down. Parameter changes are cross-faded over one overlap with the
//! squared window.

use crate::entropy::Coder;
use crate::transform::{window_value, OVERLAP};

pub const MIN_PERIOD: usize = 15;
pub const MAX_PERIOD: usize = 1022;
pub const PERIOD_LEVELS: u32 = (MAX_PERIOD - MIN_PERIOD + 1) as u32;
pub const GAIN_STEP: f64 = 0.09375;
/// Correlation below which the filter stays off.
pub const MIN_CORRELATION: f64 = 0.2;
const HISTORY: usize = MAX_PERIOD + 3;
/// Minimum analysis window in samples.
pub const ANALYSIS_WINDOW: usize = 480;

/// Tap weights `[a0, a1, a2]` applied at lags `T`, `T +- 1`, `T +- 2`.
pub const TAPSETS: [[f64; 3]; 3] = [[0.80, 0.10, 0.0], [0.46, 0.27, 0.0], [0.30, 0.22, 0.13]];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PitchParams {
    pub enabled: bool,
    pub period: usize,
    /// Gain level `0..=7`; the gain is `0.09375 * (q + 1)`.
    pub gain_q: u8,
    pub tapset: u8,
}

impl Default for PitchParams {
    fn default() -> Self {
        Self::off()
    }
}

impl PitchParams {
    pub const fn off() -> Self {
        Self { enabled: false, period: MIN_PERIOD, gain_q: 0, tapset: 0 }
    }

    pub fn new(period: usize, gain_q: u8, tapset: u8) -> Self {
        Self {
            enabled: true,
            period: period.clamp(MIN_PERIOD, MAX_PERIOD),
            gain_q: gain_q.min(7),
            tapset: tapset.min(2),
        }
    }

    pub fn gain(&self) -> f64 {
        if self.enabled {
            GAIN_STEP * (self.gain_q as f64 + 1.0)
        } else {
            0.0
        }
    }
}

/// Comb contribution at position `n` of `s` (which holds enough history).
fn comb(s: &[f64], n: usize, p: &PitchParams) -> f64 {
    let g = p.gain();
    if g == 0.0 {
        return 0.0;
    }
    let a = TAPSETS[p.tapset as usize];
    let c = n - p.period;
    g * (a[0] * s[c] + a[1] * (s[c - 1] + s[c + 1]) + a[2] * (s[c - 2] + s[c + 2]))
}

/// Cross-fade weight of the new parameters at chunk offset `pos`.
fn fade(pos: usize) -> f64 {
    if pos < OVERLAP {
        let w = window_value(pos, OVERLAP);
        w * w
    } else {
        1.0
    }
}

/// One channel of the comb filter. The prefilter remembers its input and
/// the postfilter its output, which are the same signal when nothing is
/// lost in between.
#[derive(Debug, Clone)]
pub struct CombFilter {
    inverse: bool,
    history: Vec<f64>,
}

impl CombFilter {
    pub fn prefilter() -> Self {
        Self { inverse: false, history: vec![0.0; HISTORY] }
    }

    pub fn postfilter() -> Self {
        Self { inverse: true, history: vec![0.0; HISTORY] }
    }

    /// Filters `x` in place. `offset` is the position of `x[0]` within the
    /// encoder chunk, where `old` fades into `new` over the first
    /// [`OVERLAP`] samples.
    pub fn process(&mut self, x: &mut [f64], old: &PitchParams, new: &PitchParams, offset: usize) {
        let h = self.history.len();
        let mut s = std::mem::take(&mut self.history);
        s.extend_from_slice(x);
        let same = old == new;
        for (i, v) in x.iter_mut().enumerate() {
            let n = h + i;
            let c_new = comb(&s, n, new);
            let c = if same {
                c_new
            } else {
                let w = fade(offset + i);
                (1.0 - w) * comb(&s, n, old) + w * c_new
            };
            if self.inverse {
                *v += c;
                s[n] = *v;
            } else {
                *v -= c;
            }
        }
        self.history = s.split_off(s.len() - HISTORY);
    }

    pub fn reset(&mut self) {
        self.history.iter_mut().for_each(|v| *v = 0.0);
    }
}

fn normalized_corr(x: &[f64], start: usize, lag: usize) -> f64 {
    let mut xy = 0.0;
    let mut xx = 0.0;
    let mut yy = 0.0;
    for n in start..x.len() {
        let a = x[n];
        let b = x[n - lag];
        xy += a * b;
        xx += a * a;
        yy += b * b;
    }
    if xx <= 1e-9 || yy <= 1e-9 {
        0.0
    } else {
        xy / (xx * yy).sqrt()
    }
}

/// Open-loop pitch analysis over the end of `signal`, which must hold at
/// least `MAX_PERIOD + 2 + ANALYSIS_WINDOW` samples of pre-emphasized input.
pub fn pitch_analyze(signal: &[f64], window: usize) -> PitchParams {
    let window = window.max(ANALYSIS_WINDOW);
    let need = window + MAX_PERIOD + 2;
    if signal.len() < need {
        return PitchParams::off();
    }
    let x = &signal[signal.len() - need..];
    let energy: f64 = x[need - window..].iter().map(|v| v * v).sum();
    if energy < window as f64 {
        return PitchParams::off();
    }

    // coarse search at half rate
    let half: Vec<f64> = x.chunks_exact(2).map(|c| 0.5 * (c[0] + c[1])).collect();
    let hstart = half.len() - window / 2;
    let lo = MIN_PERIOD / 2;
    let hi = (MAX_PERIOD / 2).min(hstart);
    let corr: Vec<f64> = (lo..=hi).map(|t| normalized_corr(&half, hstart, t)).collect();
    let best = corr.iter().cloned().fold(f64::MIN, f64::max);
    if best < MIN_CORRELATION {
        return PitchParams::off();
    }
    let coarse = lo + corr.iter().position(|&c| c >= 0.9 * best).unwrap_or(0);

    // refinement at full rate
    let start = need - window;
    let mut period = 0;
    let mut c = f64::MIN;
    let a = (2 * coarse).saturating_sub(3).max(MIN_PERIOD);
    let b = (2 * coarse + 3).min(MAX_PERIOD);
    for t in a..=b {
        let v = normalized_corr(x, start, t);
        if v > c {
            c = v;
            period = t;
        }
    }
    if c < MIN_CORRELATION {
        return PitchParams::off();
    }
    let gain_q = ((c * 8.0).round() as i32 - 1).clamp(0, 7) as u8;

    // keep high-frequency enhancement for bright signals only
    let seg = &x[start..];
    let diff: f64 = seg.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum();
    let ratio = diff / energy;
    let tapset = if ratio > 1.0 {
        0
    } else if ratio > 0.3 {
        1
    } else {
        2
    };
    PitchParams::new(period, gain_q, tapset)
}

/// Sends or receives the filter parameters within `limit` eighth-bits.
pub fn code_pitch_params<C: Coder>(coder: &mut C, p: &PitchParams, limit: i64) -> PitchParams {
    // enable bit plus a generous bound on the payload
    if coder.tell_frac() as i64 + 8 * 18 > limit {
        return PitchParams::off();
    }
    if !coder.code_bit_logp(p.enabled, 1) {
        return PitchParams::off();
    }
    let t = coder.code_uint(p.period.clamp(MIN_PERIOD, MAX_PERIOD) as u32 - MIN_PERIOD as u32, PERIOD_LEVELS);
    let g = coder.code_bits(p.gain_q as u32, 3);
    let tap = coder.code_uint(p.tapset as u32, 3);
    PitchParams::new(t as usize + MIN_PERIOD, g as u8, tap as u8)
}
