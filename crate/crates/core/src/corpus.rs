//! Synthetic test signals.
//!
//! Six deterministic signals covering the codec's main cases: a steady
//! tone, a sweep, a pulse train, noise, castanet-like clicks and a tonal
//! mix with attacks. Samples are interleaved and lie in `[-1, 1]`.

use std::f64::consts::PI;

use crate::bands::Lcg;
use crate::SAMPLE_RATE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Tone,
    Sweep,
    PulseTrain,
    Noise,
    Castanets,
    Mix,
}

impl Signal {
    pub const ALL: [Signal; 6] =
        [Signal::Tone, Signal::Sweep, Signal::PulseTrain, Signal::Noise, Signal::Castanets, Signal::Mix];

    pub fn name(self) -> &'static str {
        match self {
            Signal::Tone => "tone",
            Signal::Sweep => "sweep",
            Signal::PulseTrain => "pulse_train",
            Signal::Noise => "noise",
            Signal::Castanets => "castanets",
            Signal::Mix => "mix",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

fn tone(len: usize, freq: f64, amp: f64, phase: f64) -> Vec<f64> {
    let fs = SAMPLE_RATE as f64;
    (0..len).map(|n| amp * (2.0 * PI * freq * n as f64 / fs + phase).sin()).collect()
}

fn sweep(len: usize) -> Vec<f64> {
    // exponential sweep from 50 Hz to 16 kHz
    let fs = SAMPLE_RATE as f64;
    let (f0, f1) = (50.0f64, 16_000.0f64);
    let t1 = len as f64 / fs;
    let k = (f1 / f0).ln() / t1;
    (0..len)
        .map(|n| {
            let t = n as f64 / fs;
            0.4 * (2.0 * PI * f0 * ((k * t).exp() - 1.0) / k).sin()
        })
        .collect()
}

fn pulse_train(len: usize, period: usize) -> Vec<f64> {
    // band-limited pulses: a short raised-cosine click every period
    let mut x = vec![0.0; len];
    for start in (0..len).step_by(period) {
        for (i, v) in x[start..].iter_mut().take(8).enumerate() {
            *v = 0.5 * (1.0 - (2.0 * PI * (i as f64 + 0.5) / 8.0).cos()) * 0.6;
        }
    }
    x
}

fn noise(len: usize, rng: &mut Lcg, amp: f64) -> Vec<f64> {
    (0..len).map(|_| amp * rng.next_signed()).collect()
}

fn castanets(len: usize, rng: &mut Lcg) -> Vec<f64> {
    let fs = SAMPLE_RATE as f64;
    let mut x = vec![0.0; len];
    let mut pos = 2400;
    let mut k = 0;
    while pos < len {
        // decaying bright burst of about 5 ms
        let f = 2500.0 + 700.0 * (k % 3) as f64;
        for i in 0..240.min(len - pos) {
            let env = (-(i as f64) / 40.0).exp();
            let t = i as f64 / fs;
            x[pos + i] += 0.8 * env * (0.6 * (2.0 * PI * f * t).sin() + 0.4 * rng.next_signed());
        }
        pos += if k % 2 == 0 { 5280 } else { 8160 };
        k += 1;
    }
    x
}

/// Generates `len` samples per channel. A second channel is a slightly
/// different but correlated version of the first.
pub fn generate(signal: Signal, len: usize, channels: usize) -> Vec<f64> {
    let mut rng = Lcg::new(0xC0FFEE ^ signal as u32);
    let mut chans = Vec::with_capacity(channels);
    for c in 0..channels {
        let x = match signal {
            Signal::Tone => tone(len, 440.0, 0.5, 0.3 * c as f64),
            Signal::Sweep => sweep(len).into_iter().map(|v| v * (1.0 - 0.2 * c as f64)).collect(),
            Signal::PulseTrain => pulse_train(len, 240),
            Signal::Noise => noise(len, &mut rng, 0.3),
            Signal::Castanets => castanets(len, &mut rng),
            Signal::Mix => {
                let mut m = tone(len, 220.0, 0.25, 0.0);
                for (v, w) in m.iter_mut().zip(tone(len, 1320.0 + 5.0 * c as f64, 0.1, 0.0)) {
                    *v += w;
                }
                for (v, w) in m.iter_mut().zip(castanets(len, &mut rng)) {
                    *v += 0.5 * w;
                }
                m
            }
        };
        chans.push(x);
    }
    let mut out = vec![0.0; len * channels];
    for (c, x) in chans.iter().enumerate() {
        for (i, v) in x.iter().enumerate() {
            out[i * channels + c] = v.clamp(-1.0, 1.0);
        }
    }
    out
}
