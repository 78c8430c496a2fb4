//! Objective quality metrics and the cascaded-transcode harness.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::bands::{BAND_EDGES, NUM_BANDS};
use crate::codec::{transcode, EncoderConfig};
use crate::error::{Error, Result};
use crate::SAMPLE_RATE;

pub const SEGMENT: usize = 480;
pub const SNR_MIN: f64 = -20.0;
pub const SNR_MAX: f64 = 99.0;
pub const FFT_LEN: usize = 1024;
const EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// Segmental SNR in dB.
    pub seg_snr: f64,
    /// Log-spectral distance in dB.
    pub lsd: f64,
    /// Mean absolute band-energy error in dB, one entry per band.
    pub band_error: Vec<f64>,
}

fn channel(x: &[f64], channels: usize, c: usize) -> Vec<f64> {
    x.iter().skip(c).step_by(channels).copied().collect()
}

/// Segmental SNR over 480-sample segments, each clamped to `[-20, 99]` dB.
pub fn seg_snr(reference: &[f64], test: &[f64], channels: usize) -> f64 {
    let mut sum = 0.0;
    let mut count = 0;
    for c in 0..channels {
        let r = channel(reference, channels, c);
        let t = channel(test, channels, c);
        for (rs, ts) in r.chunks(SEGMENT).zip(t.chunks(SEGMENT)) {
            let sig: f64 = rs.iter().map(|v| v * v).sum();
            let err: f64 = rs.iter().zip(ts).map(|(a, b)| (a - b) * (a - b)).sum();
            let snr = if err == 0.0 { SNR_MAX } else if sig == 0.0 { SNR_MIN } else { 10.0 * (sig / err).log10() };
            sum += snr.clamp(SNR_MIN, SNR_MAX);
            count += 1;
        }
    }
    if count == 0 {
        SNR_MAX
    } else {
        sum / count as f64
    }
}

/// Power spectra of Hann-windowed 1024-sample frames with 50% overlap.
fn spectra(x: &[f64]) -> Vec<Vec<f64>> {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(FFT_LEN);
    let win: Vec<f64> = (0..FFT_LEN).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / FFT_LEN as f64).cos()).collect();
    let mut out = Vec::new();
    let mut start = 0;
    while start + FFT_LEN <= x.len().max(FFT_LEN) {
        let mut buf: Vec<Complex<f64>> = (0..FFT_LEN)
            .map(|n| Complex::new(x.get(start + n).copied().unwrap_or(0.0) * win[n], 0.0))
            .collect();
        fft.process(&mut buf);
        out.push(buf[..=FFT_LEN / 2].iter().map(|v| v.norm_sqr()).collect());
        start += FFT_LEN / 2;
    }
    out
}

fn band_bins(b: usize) -> std::ops::Range<usize> {
    // band edges are in 200 Hz units
    let hz = |e: usize| e as f64 * (SAMPLE_RATE as f64 / 240.0);
    let bin = |f: f64| ((f / SAMPLE_RATE as f64 * FFT_LEN as f64).round() as usize).min(FFT_LEN / 2);
    let lo = bin(hz(BAND_EDGES[b]));
    let hi = bin(hz(BAND_EDGES[b + 1])).max(lo + 1);
    lo..hi
}

/// Computes all metrics. Inputs are interleaved and must have equal length.
pub fn compare(reference: &[f64], test: &[f64], channels: usize) -> Result<MetricReport> {
    if reference.len() != test.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} vs {} samples",
            reference.len(),
            test.len()
        )));
    }
    // the distance covers the coded range only; nothing above it is coded
    let top = band_bins(NUM_BANDS - 1).end;
    let mut lsd_sum = 0.0;
    let mut frames = 0usize;
    let mut band = vec![0.0; NUM_BANDS];
    for c in 0..channels {
        let r = spectra(&channel(reference, channels, c));
        let t = spectra(&channel(test, channels, c));
        for (pr, pt) in r.iter().zip(&t) {
            let d: f64 = pr[..top]
                .iter()
                .zip(&pt[..top])
                .map(|(a, b)| {
                    let v = 10.0 * ((a + EPS) / (b + EPS)).log10();
                    v * v
                })
                .sum::<f64>()
                / top as f64;
            lsd_sum += d.sqrt();
            for (b, e) in band.iter_mut().enumerate() {
                let bins = band_bins(b);
                let er: f64 = pr[bins.clone()].iter().sum();
                let et: f64 = pt[bins].iter().sum();
                *e += (10.0 * ((er + EPS) / (et + EPS)).log10()).abs();
            }
            frames += 1;
        }
    }
    let f = frames.max(1) as f64;
    Ok(MetricReport {
        seg_snr: seg_snr(reference, test, channels),
        lsd: lsd_sum / f,
        band_error: band.into_iter().map(|v| v / f).collect(),
    })
}

/// Transcodes `pcm` `generations` times in sequence and reports the
/// metrics of every generation against the original.
pub fn cascade(pcm: &[f64], cfg: &EncoderConfig, generations: usize) -> Result<Vec<MetricReport>> {
    let mut cur = pcm.to_vec();
    let mut out = Vec::with_capacity(generations);
    for _ in 0..generations {
        cur = transcode(&cur, cfg)?;
        out.push(compare(pcm, &cur, cfg.channels)?);
    }
    Ok(out)
}
