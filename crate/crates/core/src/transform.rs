//! Low-overlap MDCT analysis and synthesis, emphasis filters and the
//! transient detector.
//!
//! Every frame of `N` new samples is transformed together with the last
//! [`OVERLAP`] samples of the previous frame. The long window is flat except
//! for the two 120-sample power-complementary flanks; transient frames use
//! `N / 120` short full-overlap MDCTs whose outputs are interleaved so that
//! coefficient `j` of block `b` lands at index `j * B + b`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Overlap between consecutive frames, in samples (2.5 ms).
pub const OVERLAP: usize = 120;
/// Size of one short MDCT.
pub const SHORT_MDCT: usize = 120;
/// First-order emphasis coefficient.
pub const EMPHASIS: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameDuration {
    Ms2_5,
    Ms5,
    Ms10,
    Ms20,
}

impl FrameDuration {
    pub const ALL: [FrameDuration; 4] = [Self::Ms2_5, Self::Ms5, Self::Ms10, Self::Ms20];

    /// log2 of the frame size in units of 120 samples.
    pub fn lm(self) -> u32 {
        match self {
            Self::Ms2_5 => 0,
            Self::Ms5 => 1,
            Self::Ms10 => 2,
            Self::Ms20 => 3,
        }
    }

    pub fn frame_size(self) -> usize {
        SHORT_MDCT << self.lm()
    }

    pub fn millis(self) -> f64 {
        2.5 * (1 << self.lm()) as f64
    }

    pub fn code(self) -> u8 {
        self.lm() as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn from_millis(ms: f64) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| (d.millis() - ms).abs() < 1e-9)
            .ok_or_else(|| Error::InvalidInput(format!("unsupported frame duration {ms} ms")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameConfig {
    pub duration: FrameDuration,
    pub channels: usize,
}

impl FrameConfig {
    pub fn new(duration: FrameDuration, channels: usize) -> Result<Self> {
        if !(1..=2).contains(&channels) {
            return Err(Error::InvalidInput(format!("unsupported channel count {channels}")));
        }
        Ok(Self { duration, channels })
    }

    pub fn frame_size(&self) -> usize {
        self.duration.frame_size()
    }

    /// Number of MDCTs covering the frame.
    pub fn blocks(&self, transient: bool) -> usize {
        if transient {
            self.frame_size() / SHORT_MDCT
        } else {
            1
        }
    }

    /// Transient (short-block) coding needs more than one short MDCT.
    pub fn supports_transients(&self) -> bool {
        self.duration != FrameDuration::Ms2_5
    }
}

/// Power-complementary window flank: `w(n)^2 + w(L-1-n)^2 = 1`.
pub fn window_value(n: usize, overlap: usize) -> f64 {
    let s = (PI * (n as f64 + 0.5) / (2.0 * overlap as f64)).sin();
    (0.5 * PI * s * s).sin()
}

/// The rising flank of length [`OVERLAP`].
pub fn window_flank() -> Vec<f64> {
    (0..OVERLAP).map(|n| window_value(n, OVERLAP)).collect()
}

/// `y[n] = x[n] - 0.85 x[n-1]`, state carried across calls.
#[derive(Debug, Clone, Default)]
pub struct PreEmphasis {
    mem: f64,
}

impl PreEmphasis {
    pub fn process(&mut self, x: &mut [f64]) {
        for v in x.iter_mut() {
            let cur = *v;
            *v = cur - EMPHASIS * self.mem;
            self.mem = cur;
        }
    }
}

/// `y[n] = x[n] + 0.85 y[n-1]`, the inverse of [`PreEmphasis`].
#[derive(Debug, Clone, Default)]
pub struct DeEmphasis {
    mem: f64,
}

impl DeEmphasis {
    pub fn process(&mut self, x: &mut [f64]) {
        for v in x.iter_mut() {
            *v += EMPHASIS * self.mem;
            self.mem = *v;
        }
    }
}

/// Converts block-major data (`blocks` runs of equal length) to the
/// interleaved layout `j * blocks + b`.
pub fn interleave(x: &[f64], blocks: usize) -> Vec<f64> {
    if blocks <= 1 {
        return x.to_vec();
    }
    let len = x.len() / blocks;
    let mut out = vec![0.0; x.len()];
    for b in 0..blocks {
        for j in 0..len {
            out[j * blocks + b] = x[b * len + j];
        }
    }
    out
}

/// Inverse of [`interleave`].
pub fn deinterleave(x: &[f64], blocks: usize) -> Vec<f64> {
    if blocks <= 1 {
        return x.to_vec();
    }
    let len = x.len() / blocks;
    let mut out = vec![0.0; x.len()];
    for b in 0..blocks {
        for j in 0..len {
            out[b * len + j] = x[j * blocks + b];
        }
    }
    out
}

/// One MDCT size with the codec's low-overlap window.
///
/// Inputs and outputs cover the `n + OVERLAP` samples where the window is
/// non-zero; the zero tails of the full `2n` window are implicit.
pub struct Mdct {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    pre: Vec<Complex<f64>>,
    post: Vec<Complex<f64>>,
}

impl std::fmt::Debug for Mdct {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mdct").field("n", &self.n).finish()
    }
}

impl Mdct {
    pub fn new(n: usize) -> Self {
        assert!(n >= OVERLAP && n % 2 == 0 && (n - OVERLAP) % 2 == 0);
        let fft = FftPlanner::new().plan_fft_forward(2 * n);
        let flank = window_flank();
        let mut window = vec![1.0; n + OVERLAP];
        for i in 0..OVERLAP {
            window[i] = flank[i];
            window[n + i] = flank[OVERLAP - 1 - i];
        }
        let nf = n as f64;
        let pre = (0..n)
            .map(|k| Complex::from_polar(1.0, -PI * k as f64 / (2.0 * nf)))
            .collect();
        let scale = (2.0 / nf).sqrt();
        let post = (0..n)
            .map(|k| Complex::from_polar(scale, -PI * (k as f64 + 0.5) / (2.0 * nf)))
            .collect();
        Self { n, fft, window, pre, post }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Window over the non-zero span.
    pub fn window(&self) -> &[f64] {
        &self.window
    }

    fn pad(&self) -> usize {
        (self.n - OVERLAP) / 2
    }

    /// Orthonormal DCT-IV through a `2n` complex FFT.
    fn dct4(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut buf = vec![Complex::new(0.0, 0.0); 2 * n];
        for k in 0..n {
            buf[k] = self.pre[k] * u[k];
        }
        self.fft.process(&mut buf);
        (0..n).map(|k| (self.post[k] * buf[k]).re).collect()
    }

    /// Forward transform of `span` (length `n + OVERLAP`).
    pub fn forward(&self, span: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(span.len(), n + OVERLAP);
        let pad = self.pad();
        let mut x = vec![0.0; 2 * n];
        for (i, (&s, &w)) in span.iter().zip(&self.window).enumerate() {
            x[pad + i] = s * w;
        }
        let h = n / 2;
        let mut u = vec![0.0; n];
        for j in 0..h {
            u[j] = -x[3 * h - 1 - j] - x[3 * h + j];
        }
        for j in h..n {
            u[j] = x[j - h] - x[3 * h - 1 - j];
        }
        self.dct4(&u)
    }

    /// Inverse transform; returns the windowed `n + OVERLAP` span to be
    /// overlap-added.
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(coeffs.len(), n);
        let u = self.dct4(coeffs);
        let h = n / 2;
        let mut y = vec![0.0; 2 * n];
        for j in 0..h {
            y[3 * h - 1 - j] -= u[j];
            y[3 * h + j] -= u[j];
        }
        for j in h..n {
            y[j - h] += u[j];
            y[3 * h - 1 - j] -= u[j];
        }
        let pad = self.pad();
        (0..n + OVERLAP).map(|i| y[pad + i] * self.window[i]).collect()
    }
}

/// Direct O(N^2) MDCT of a full `2n` block with the codec window applied.
/// Kept as a ground truth for the fast path.
pub fn mdct_reference(span: &[f64], n: usize) -> Vec<f64> {
    let m = Mdct::new(n);
    let pad = (n - OVERLAP) / 2;
    let mut x = vec![0.0; 2 * n];
    for (i, (&s, &w)) in span.iter().zip(m.window()).enumerate() {
        x[pad + i] = s * w;
    }
    let nf = n as f64;
    let scale = (2.0 / nf).sqrt();
    (0..n)
        .map(|k| {
            scale
                * x.iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        v * (PI / nf * (i as f64 + 0.5 + nf / 2.0) * (k as f64 + 0.5)).cos()
                    })
                    .sum::<f64>()
        })
        .collect()
}

/// Long and short transforms for one frame size.
#[derive(Debug)]
pub struct FrameTransform {
    long: Mdct,
    short: Option<Mdct>,
}

impl FrameTransform {
    pub fn new(duration: FrameDuration) -> Self {
        let n = duration.frame_size();
        let short = (n > SHORT_MDCT).then(|| Mdct::new(SHORT_MDCT));
        Self { long: Mdct::new(n), short }
    }

    pub fn frame_size(&self) -> usize {
        self.long.size()
    }

    /// Transforms `span` (`N + OVERLAP` samples) with `blocks` MDCTs,
    /// returning `N` coefficients, interleaved when `blocks > 1`.
    pub fn analyze(&self, span: &[f64], blocks: usize) -> Vec<f64> {
        let n = self.frame_size();
        assert_eq!(span.len(), n + OVERLAP);
        if blocks <= 1 {
            return self.long.forward(span);
        }
        let short = self.short.as_ref().expect("short blocks need frames above 2.5 ms");
        let len = n / blocks;
        assert_eq!(len, SHORT_MDCT);
        let mut major = Vec::with_capacity(n);
        for b in 0..blocks {
            major.extend(short.forward(&span[b * len..b * len + len + OVERLAP]));
        }
        interleave(&major, blocks)
    }

    /// Inverse of [`analyze`](Self::analyze) with overlap-add against
    /// `mem` (the previous frame's tail). Returns `N` finished samples.
    pub fn synthesize(&self, coeffs: &[f64], blocks: usize, mem: &mut [f64]) -> Vec<f64> {
        let n = self.frame_size();
        assert_eq!(coeffs.len(), n);
        assert_eq!(mem.len(), OVERLAP);
        let mut out = if blocks <= 1 {
            self.long.inverse(coeffs)
        } else {
            let short = self.short.as_ref().expect("short blocks need frames above 2.5 ms");
            let len = n / blocks;
            let major = deinterleave(coeffs, blocks);
            let mut out = vec![0.0; n + OVERLAP];
            for b in 0..blocks {
                let y = short.inverse(&major[b * len..(b + 1) * len]);
                for (o, v) in out[b * len..].iter_mut().zip(y) {
                    *o += v;
                }
            }
            out
        };
        for (o, m) in out.iter_mut().zip(mem.iter()) {
            *o += m;
        }
        mem.copy_from_slice(&out[n..]);
        out.truncate(n);
        out
    }
}

const TRANSIENT_BLOCK: usize = 60;
const TRANSIENT_RATIO: f64 = 10.0;
/// Energy floor per detector block for signals at 16-bit scale.
const TRANSIENT_FLOOR: f64 = 16.0 * TRANSIENT_BLOCK as f64;

/// Flags an abrupt rise of high-frequency energy inside `span`.
///
/// `span` is the pre-emphasized MDCT input at 16-bit sample scale. The
/// signal is high-passed with a second-order difference and its block
/// energies compared against the mean of all earlier blocks.
pub fn detect_transient(span: &[f64]) -> bool {
    if span.len() < 3 * TRANSIENT_BLOCK {
        return false;
    }
    let hp: Vec<f64> = span.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
    let energies: Vec<f64> = hp
        .chunks_exact(TRANSIENT_BLOCK)
        .map(|c| c.iter().map(|v| v * v).sum())
        .collect();
    let mut acc = 0.0;
    for (i, &e) in energies.iter().enumerate() {
        if i >= 2 {
            let mean = acc / i as f64;
            if e > TRANSIENT_RATIO * (mean + TRANSIENT_FLOOR) {
                return true;
            }
        }
        acc += e;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_power_complementary() {
        let l = 120;
        let mut sum = 0.0;
        for n in 0..l {
            let a = window_value(n, l);
            let b = window_value(l - 1 - n, l);
            assert!((a * a + b * b - 1.0).abs() < 1e-12);
            sum += a * a + b * b;
        }
        assert!((sum - l as f64).abs() < 1e-9);
        assert!(window_value(l - 1, l) > 0.9999);
    }

    #[test]
    fn window_two_point() {
        let expect = (0.5 * PI * (PI / 8.0).sin().powi(2)).sin();
        assert!((window_value(0, 2) - expect).abs() < 1e-15);
    }

    #[test]
    fn emphasis_dc_and_impulse() {
        let mut pre = PreEmphasis::default();
        let mut x = vec![1.0; 10];
        pre.process(&mut x);
        assert!((x[9] - 0.15).abs() < 1e-12);

        let mut pre = PreEmphasis::default();
        let mut imp = vec![1.0, 0.0, 0.0, 0.0];
        pre.process(&mut imp);
        assert_eq!(imp, vec![1.0, -0.85, 0.0, 0.0]);
    }

    #[test]
    fn fast_mdct_matches_reference() {
        for n in [120, 240, 480] {
            let span: Vec<f64> = (0..n + OVERLAP).map(|i| ((i * 7919) % 97) as f64 - 48.0).collect();
            let fast = Mdct::new(n).forward(&span);
            let slow = mdct_reference(&span, n);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-8, "n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn interleave_roundtrip() {
        let x: Vec<f64> = (0..24).map(|i| i as f64).collect();
        for b in [1, 2, 4, 8] {
            assert_eq!(deinterleave(&interleave(&x, b), b), x);
        }
        let il = interleave(&x, 4);
        // coefficient 1 of block 2 -> index 1*4 + 2
        assert_eq!(il[6], x[2 * 6 + 1]);
    }

    #[test]
    fn duration_codes() {
        for d in FrameDuration::ALL {
            assert_eq!(FrameDuration::from_code(d.code()), Some(d));
            assert_eq!(FrameDuration::from_millis(d.millis()).unwrap(), d);
        }
        assert!(FrameDuration::from_millis(3.0).is_err());
        assert_eq!(FrameDuration::Ms20.frame_size(), 960);
    }

    #[test]
    fn silence_is_not_transient() {
        assert!(!detect_transient(&vec![0.0; 1080]));
    }
}
