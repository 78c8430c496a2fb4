//! Band layout and the vector operations applied to normalized bands.

use std::f64::consts::FRAC_PI_2;
use std::f64::consts::FRAC_PI_4;

use crate::error::{Error, Result};

pub const NUM_BANDS: usize = 21;

/// Band edges in MDCT bins for the 120-bin (2.5 ms) transform.
pub const BAND_EDGES: [usize; NUM_BANDS + 1] = [
    0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 14, 16, 20, 24, 28, 34, 40, 48, 60, 78, 100,
];

/// Guard added to band norms before taking the log.
pub const ENERGY_EPS: f64 = 1e-27;

/// Band edges scaled to one frame size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandLayout {
    scale: usize,
}

impl BandLayout {
    /// `frame_size` must be a multiple of 120.
    pub fn new(frame_size: usize) -> Self {
        assert!(frame_size % 120 == 0 && frame_size > 0);
        Self { scale: frame_size / 120 }
    }

    pub fn start(&self, band: usize) -> usize {
        BAND_EDGES[band] * self.scale
    }

    pub fn end(&self, band: usize) -> usize {
        BAND_EDGES[band + 1] * self.scale
    }

    pub fn width(&self, band: usize) -> usize {
        self.end(band) - self.start(band)
    }

    /// Bins at or above this index are never coded.
    pub fn coded_bins(&self) -> usize {
        self.end(NUM_BANDS - 1)
    }

    pub fn range(&self, band: usize) -> std::ops::Range<usize> {
        self.start(band)..self.end(band)
    }
}

/// `log2(||X_b|| + eps)` for every band.
pub fn band_energy(coeffs: &[f64], layout: &BandLayout) -> Vec<f64> {
    (0..NUM_BANDS)
        .map(|b| (norm(&coeffs[layout.range(b)]) + ENERGY_EPS).log2())
        .collect()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Scales `x` to unit norm. A zero band is left as zeros and reported with
/// [`Error::InvalidInput`] so the caller can fold into it.
pub fn normalize_band(x: &mut [f64]) -> Result<()> {
    let n = norm(x);
    if n <= ENERGY_EPS {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Err(Error::InvalidInput("zero band".into()));
    }
    x.iter_mut().for_each(|v| *v /= n);
    Ok(())
}

/// Scales a unit vector to norm `2^energy`.
pub fn denormalize_band(x: &mut [f64], energy: f64) {
    let g = energy.exp2();
    x.iter_mut().for_each(|v| *v *= g);
}

/// 32-bit linear congruential generator used for all decoder-side noise.
#[derive(Debug, Clone)]
pub struct Lcg(u32);

impl Lcg {
    pub fn new(seed: u32) -> Self {
        Self(seed)
    }

    /// Per-frame generator derived from a stream seed and the frame index.
    pub fn for_frame(seed: u32, frame: u64) -> Self {
        Self(seed ^ (frame as u32).wrapping_mul(0x9E37_79B9))
    }

    pub fn next_u32(&mut self) -> u32 {
        self.0 = self.0.wrapping_mul(1_664_525).wrapping_add(1_013_904_223);
        self.0
    }

    /// Uniform in `[-1, 1)`.
    pub fn next_signed(&mut self) -> f64 {
        (self.next_u32() as i32) as f64 / 2_147_483_648.0
    }
}

/// Unit-norm pseudo-random vector.
pub fn noise_vector(len: usize, rng: &mut Lcg) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..len).map(|_| rng.next_signed()).collect();
        if len == 0 || normalize_band(&mut v).is_ok() {
            return v;
        }
    }
}

/// Fills a band that received no pulses.
///
/// Copies the `width` normalized coefficients just below `start`, wrapping
/// cyclically over `[0, start)` when not enough are available. `start` and
/// `width` are multiples of the short-block count, so the copy keeps every
/// coefficient in its short block. Falls back to noise when nothing below
/// has energy.
pub fn spectral_fold(norm_spectrum: &[f64], start: usize, width: usize, rng: &mut Lcg) -> Vec<f64> {
    if start == 0 {
        return noise_vector(width, rng);
    }
    let src = start.saturating_sub(width);
    let mut out: Vec<f64> = (0..width).map(|i| norm_spectrum[(src + i) % start]).collect();
    if normalize_band(&mut out).is_err() {
        return noise_vector(width, rng);
    }
    out
}

/// Spreading constants selectable per frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spread {
    Off,
    Delta5,
    Delta10,
    Delta15,
}

impl Spread {
    pub fn delta(self) -> Option<f64> {
        match self {
            Self::Off => None,
            Self::Delta5 => Some(5.0),
            Self::Delta10 => Some(10.0),
            Self::Delta15 => Some(15.0),
        }
    }

    pub fn index(self) -> u32 {
        match self {
            Self::Off => 0,
            Self::Delta5 => 1,
            Self::Delta10 => 2,
            Self::Delta15 => 3,
        }
    }

    pub fn from_index(i: u32) -> Self {
        match i {
            1 => Self::Delta5,
            2 => Self::Delta10,
            3 => Self::Delta15,
            _ => Self::Off,
        }
    }
}

/// `theta = pi/4 * (N / (N + delta K))^2`.
pub fn spread_angle(n: usize, k: u32, delta: f64) -> f64 {
    let n = n as f64;
    let g = n / (n + delta * k as f64);
    FRAC_PI_4 * g * g
}

fn rotate_pair(x: &mut [f64], a: usize, b: usize, c: f64, s: f64) {
    let (xa, xb) = (x[a], x[b]);
    x[a] = c * xa - s * xb;
    x[b] = s * xa + c * xb;
}

/// Up-sweep over adjacent pairs followed by a down-sweep, preceded for
/// vectors longer than 8 by a pass over pairs `floor(sqrt(N))` apart.
fn rotations(n: usize, theta: f64) -> Vec<(usize, usize, f64)> {
    let mut ops = Vec::new();
    if n < 2 {
        return ops;
    }
    if n > 8 {
        let stride = (n as f64).sqrt().floor() as usize;
        let alt = FRAC_PI_2 - theta;
        for k in 0..n - stride {
            ops.push((k, k + stride, alt));
        }
    }
    for k in 0..n.saturating_sub(2) {
        ops.push((k, k + 1, theta));
    }
    for k in (0..n - 1).rev() {
        ops.push((k, k + 1, theta));
    }
    ops
}

/// Applies (or undoes) the spreading rotation to a single block.
pub fn spread_block(x: &mut [f64], theta: f64, forward: bool) {
    if theta == 0.0 {
        return;
    }
    let ops = rotations(x.len(), theta);
    if forward {
        for &(a, b, t) in &ops {
            rotate_pair(x, a, b, t.cos(), t.sin());
        }
    } else {
        for &(a, b, t) in ops.iter().rev() {
            rotate_pair(x, a, b, t.cos(), -t.sin());
        }
    }
}

/// Spreads a block-major vector of `blocks` equal runs, each block
/// separately, using the angle derived from the whole vector's size and
/// pulse count.
pub fn spread(x: &mut [f64], k: u32, spread: Spread, blocks: usize, forward: bool) {
    let Some(delta) = spread.delta() else { return };
    if k == 0 {
        return;
    }
    let theta = spread_angle(x.len(), k, delta);
    let len = x.len() / blocks.max(1);
    if len < 2 {
        return;
    }
    for chunk in x.chunks_exact_mut(len) {
        spread_block(chunk, theta, forward);
    }
}

/// In-place orthonormal Walsh-Hadamard transform (length a power of two).
pub fn hadamard(x: &mut [f64]) {
    let n = x.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (x[j], x[j + h]);
                x[j] = (a + b) * std::f64::consts::FRAC_1_SQRT_2;
                x[j + h] = (a - b) * std::f64::consts::FRAC_1_SQRT_2;
            }
        }
        h *= 2;
    }
}

/// Checks that `tf_change` is legal for a band of `width` interleaved
/// coefficients from `blocks` MDCTs.
pub fn validate_tf(width: usize, blocks: usize, tf_change: u32) -> Result<()> {
    let f = 1usize << tf_change;
    let ok = if blocks > 1 {
        f <= blocks
    } else {
        width % f == 0
    };
    if ok && tf_change <= 3 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "tf change {tf_change} incompatible with {blocks} blocks of width {width}"
        )))
    }
}

/// Time-frequency modification of one band in the interleaved layout.
///
/// With short blocks this merges the same coefficient of `2^tf_change`
/// adjacent blocks (finer frequency resolution); with a long block it mixes
/// `2^tf_change` adjacent coefficients (finer time resolution). Both cases
/// are a Hadamard over contiguous runs in the interleaved layout, so the
/// operation is its own inverse.
pub fn tf_transform(band: &mut [f64], tf_change: u32) {
    if tf_change == 0 {
        return;
    }
    for chunk in band.chunks_exact_mut(1 << tf_change) {
        hadamard(chunk);
    }
}

/// Number of independent time blocks seen by the shape coder after the TF
/// modification.
pub fn coding_blocks(blocks: usize, tf_change: u32) -> usize {
    if blocks > 1 {
        blocks >> tf_change
    } else {
        1 << tf_change
    }
}

/// Index map from coding order (block-major, blocks contiguous) to the
/// interleaved band layout.
fn coding_map(width: usize, blocks: usize, tf_change: u32) -> Vec<usize> {
    let f = 1usize << tf_change;
    let mut map = Vec::with_capacity(width);
    if blocks > 1 {
        let groups = blocks / f;
        let per_block = width / groups;
        for g in 0..groups {
            for i in 0..per_block {
                let (j, h) = (i / f, i % f);
                map.push(j * blocks + g * f + h);
            }
        }
    } else {
        let per_block = width / f;
        for h in 0..f {
            for j in 0..per_block {
                map.push(j * f + h);
            }
        }
    }
    map
}

/// Reorders a TF-modified band so each coding block is contiguous.
pub fn to_coding_order(band: &[f64], blocks: usize, tf_change: u32) -> Vec<f64> {
    coding_map(band.len(), blocks, tf_change).into_iter().map(|i| band[i]).collect()
}

/// Inverse of [`to_coding_order`].
pub fn from_coding_order(coded: &[f64], blocks: usize, tf_change: u32) -> Vec<f64> {
    let mut out = vec![0.0; coded.len()];
    for (c, i) in coding_map(coded.len(), blocks, tf_change).into_iter().enumerate() {
        out[i] = coded[c];
    }
    out
}

/// Short blocks of an interleaved band whose coefficients are all zero.
pub fn band_holes(band: &[f64], blocks: usize) -> Vec<usize> {
    (0..blocks)
        .filter(|&b| band.iter().skip(b).step_by(blocks).all(|&v| v == 0.0))
        .collect()
}

/// Fills all-zero short blocks of a normalized, interleaved band.
///
/// Each hole receives noise whose norm matches the band level seen over the
/// previous two frames (`history_min`, log2) relative to the current band
/// energy (`energy`, log2), capped at the band's own level. The band is then
/// renormalized to unit norm. Returns the number of holes filled.
pub fn prevent_collapse(
    band: &mut [f64],
    blocks: usize,
    energy: f64,
    history_min: f64,
    rng: &mut Lcg,
) -> usize {
    if blocks <= 1 {
        return 0;
    }
    let holes = band_holes(band, blocks);
    if holes.is_empty() {
        return 0;
    }
    let level = (history_min - energy).min(0.0).exp2();
    let len = band.len() / blocks;
    for &b in &holes {
        let noise = noise_vector(len, rng);
        for (j, v) in noise.into_iter().enumerate() {
            band[j * blocks + b] = v * level;
        }
    }
    let _ = normalize_band(band);
    holes.len()
}
