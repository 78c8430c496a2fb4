//! Encoder-only decisions. None of this is visible to the decoder except
//! through the parameters it produces.

use crate::alloc::{AllocConfig, AllocResult, BOOST_QUANTUM};
use crate::bands::{norm, tf_transform, BandLayout, Spread, NUM_BANDS};

/// Spectral flatness of the coded bins: geometric over arithmetic mean of
/// the power spectrum, in `[0, 1]`.
pub(crate) fn spectral_flatness(coeffs: &[f64], bins: usize) -> f64 {
    let eps = 1e-3;
    let p: Vec<f64> = coeffs[..bins].iter().map(|v| v * v + eps).collect();
    let mean = p.iter().sum::<f64>() / bins as f64;
    let geo = (p.iter().map(|v| v.ln()).sum::<f64>() / bins as f64).exp();
    (geo / mean).clamp(0.0, 1.0)
}

pub(crate) fn choose_spread(flatness: f64, transient: bool) -> Spread {
    if transient {
        Spread::Off
    } else if flatness < 0.3 {
        Spread::Delta5
    } else if flatness <= 0.6 {
        Spread::Delta10
    } else {
        Spread::Delta15
    }
}

fn l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Flags bands whose TF-modified shape is markedly sparser.
pub(crate) fn choose_tf(norm: &[Vec<f64>], layout: &BandLayout, tf_change: u32) -> Vec<bool> {
    let mut flags = vec![false; NUM_BANDS];
    if tf_change == 0 {
        return flags;
    }
    for (b, flag) in flags.iter_mut().enumerate() {
        let (mut before, mut after) = (0.0, 0.0);
        for ch in norm {
            let mut v = ch[layout.range(b)].to_vec();
            before += l1(&v);
            tf_transform(&mut v, tf_change);
            after += l1(&v);
        }
        *flag = after < 0.9 * before;
    }
    flags
}

/// Energy per sample, log2, so bands of different width compare.
fn per_sample(e: f64, width: usize) -> f64 {
    e - 0.5 * (width as f64).log2()
}

/// Bands that deserve extra bits: leakage-dominated bands of a transient
/// frame (`long` holds the same frame's long-block energies) and bands
/// standing well above their neighbours. Each boost is limited to two thirds
/// of the band's base grant in `trial`.
pub(crate) fn choose_boosts(
    energy: &[f64],
    long: Option<&[f64]>,
    layout: &BandLayout,
    channels: usize,
    trial: &AllocResult,
) -> [u32; NUM_BANDS] {
    let mut boosts = [0u32; NUM_BANDS];
    for b in 0..NUM_BANDS {
        let mut wanted = false;
        for c in 0..channels {
            let e = |k: usize| per_sample(energy[c * NUM_BANDS + k], layout.width(k));
            if let Some(long) = long {
                if energy[c * NUM_BANDS + b] - long[c * NUM_BANDS + b] > 1.0 {
                    wanted = true;
                }
            }
            let neighbours = match b {
                0 => e(1),
                _ if b == NUM_BANDS - 1 => e(b - 1),
                _ => 0.5 * (e(b - 1) + e(b + 1)),
            };
            if e(b) - neighbours >= 1.5 && energy[c * NUM_BANDS + b] > 0.0 {
                wanted = true;
            }
        }
        if wanted {
            let cap = trial.grant[b] * 2 / 3;
            boosts[b] = (cap as u32 / BOOST_QUANTUM) * BOOST_QUANTUM;
        }
    }
    boosts
}

/// Mean absolute inter-channel correlation over the first `bands` bands.
pub(crate) fn channel_correlation(norm: &[Vec<f64>], layout: &BandLayout, bands: usize) -> f64 {
    if bands == 0 {
        return 1.0;
    }
    let sum: f64 = (0..bands)
        .map(|b| {
            let r = layout.range(b);
            let (l, rr) = (&norm[0][r.clone()], &norm[1][r]);
            let d: f64 = l.iter().zip(rr).map(|(a, b)| a * b).sum();
            let den = norm_or_one(l) * norm_or_one(rr);
            (d / den).abs()
        })
        .sum();
    sum / bands as f64
}

fn norm_or_one(x: &[f64]) -> f64 {
    let n = norm(x);
    if n > 0.0 {
        n
    } else {
        1.0
    }
}

/// First band of the run at the top whose per-channel grant is too small
/// for two independent channels.
pub(crate) fn choose_intensity(trial: &AllocResult, cfg: &AllocConfig) -> usize {
    let mut start = NUM_BANDS;
    for b in (0..trial.coded_bands).rev() {
        let w = cfg.layout.width(b) as i64;
        if trial.grant[b] / cfg.channels as i64 >= 2 * (w + 3) {
            break;
        }
        start = b;
    }
    start.min(trial.coded_bands)
}

/// Rate control for variable-bitrate streams.
#[derive(Debug, Clone)]
pub(crate) struct RateControl {
    base: f64,
    target: f64,
    produced: f64,
}

impl RateControl {
    pub fn new(base_bytes: f64) -> Self {
        Self { base: base_bytes, target: 0.0, produced: 0.0 }
    }

    pub fn min_bytes(&self) -> usize {
        ((0.5 * self.base).floor() as usize).clamp(super::MIN_PACKET, super::MAX_PACKET)
    }

    /// Bytes for the next frame: more for transients and tonal frames,
    /// steered so the long-run average meets the target.
    pub fn next(&mut self, transient: bool, tonality: f64) -> usize {
        let mut f = 1.0 + 0.3 * tonality.clamp(0.0, 1.0);
        if transient {
            f += 0.2;
        }
        // frames average about 1.15 from tonality alone; normalize
        let want = self.base * f / 1.15 + 0.25 * (self.target - self.produced);
        let bytes = want.clamp(0.5 * self.base, 1.5 * self.base).round() as usize;
        let bytes = bytes.clamp(super::MIN_PACKET, super::MAX_PACKET);
        self.target += self.base;
        self.produced += bytes as f64;
        bytes
    }
}
