//! Pyramid vector quantization of normalized band shapes.
//!
//! The codebook `S(N, K)` holds every integer vector of length `N` whose
//! absolute values sum to `K`. Vectors are enumerated position by position
//! and the index is sent with the hybrid range/raw scheme of
//! [`Coder::code_uint`](crate::entropy::Coder::code_uint).

mod split;
mod stereo;

pub use split::{band_capacity, code_band, BandCoding};
pub use stereo::{
    code_band_stereo, intensity_mid, mid_allocation, ms_couple, ms_decouple, StereoMode,
};

use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::entropy::Coder;
use crate::error::{Error, Result};
use crate::mathops::log2_frac_ceil;

/// Largest pulse count for a single vector.
pub const K_MAX: u32 = 256;
/// Leaves never use codebooks of 2^32 entries or more.
pub const MAX_LEAF_BITS: u32 = 32;
const TABLE_DIM: usize = 257;

/// `V(N, K)` by the recurrence `V(N,K) = V(N-1,K) + V(N,K-1) + V(N-1,K-1)`.
pub fn codebook_size(n: usize, k: u32) -> BigUint {
    let k = k as usize;
    // row over K for the current N, starting from N = 0
    let mut row: Vec<BigUint> = (0..=k).map(|j| if j == 0 { BigUint::one() } else { BigUint::zero() }).collect();
    for _ in 0..n {
        let mut next = vec![BigUint::one(); k + 1];
        for j in 1..=k {
            next[j] = &row[j] + &next[j - 1] + &row[j - 1];
        }
        row = next;
    }
    row.swap_remove(k)
}

fn table() -> &'static [u128] {
    static TABLE: OnceLock<Vec<u128>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![0u128; TABLE_DIM * TABLE_DIM];
        t[0] = 1;
        for n in 1..TABLE_DIM {
            t[n * TABLE_DIM] = 1;
            for k in 1..TABLE_DIM {
                let v = t[(n - 1) * TABLE_DIM + k]
                    .saturating_add(t[n * TABLE_DIM + k - 1])
                    .saturating_add(t[(n - 1) * TABLE_DIM + k - 1]);
                t[n * TABLE_DIM + k] = v;
            }
        }
        t
    })
}

/// `V(N, K)` saturated at `u128::MAX`, for `N, K <= 256`.
pub fn codebook_size_sat(n: usize, k: u32) -> u128 {
    table()[n * TABLE_DIM + k as usize]
}

fn check_vector(y: &[i32]) -> u32 {
    y.iter().map(|v| v.unsigned_abs()).sum()
}

/// Index of `y` within `S(N, K)`, `K` being the L1 norm of `y`.
pub fn encode_index(y: &[i32]) -> BigUint {
    let mut k = check_vector(y);
    let mut idx = BigUint::zero();
    for (i, &v) in y.iter().enumerate() {
        let rest = y.len() - i - 1;
        if v == 0 {
            continue;
        }
        let a = v.unsigned_abs();
        idx += codebook_size(rest, k);
        for j in 1..a {
            idx += codebook_size(rest, k - j) * 2u32;
        }
        if v < 0 {
            idx += codebook_size(rest, k - a);
        }
        k -= a;
    }
    idx
}

/// Inverse of [`encode_index`].
pub fn decode_index(index: &BigUint, n: usize, k: u32) -> Result<Vec<i32>> {
    if n == 0 {
        return if k == 0 && index.is_zero() { Ok(Vec::new()) } else { Err(Error::CorruptStream("pvq index out of range")) };
    }
    if *index >= codebook_size(n, k) {
        return Err(Error::CorruptStream("pvq index out of range"));
    }
    let mut idx = index.clone();
    let mut k = k;
    let mut y = vec![0i32; n];
    for (i, slot) in y.iter_mut().enumerate() {
        let rest = n - i - 1;
        let zero = codebook_size(rest, k);
        if idx < zero {
            continue;
        }
        idx -= zero;
        let mut a = 1;
        loop {
            let c = codebook_size(rest, k - a);
            if idx < c {
                *slot = a as i32;
                break;
            }
            idx -= &c;
            if idx < c {
                *slot = -(a as i32);
                break;
            }
            idx -= c;
            a += 1;
        }
        k -= a;
    }
    Ok(y)
}

fn encode_index_fast(y: &[i32]) -> u64 {
    let mut k = check_vector(y);
    let mut idx = 0u128;
    for (i, &v) in y.iter().enumerate() {
        if v == 0 {
            continue;
        }
        let rest = y.len() - i - 1;
        let a = v.unsigned_abs();
        idx += codebook_size_sat(rest, k);
        for j in 1..a {
            idx += 2 * codebook_size_sat(rest, k - j);
        }
        if v < 0 {
            idx += codebook_size_sat(rest, k - a);
        }
        k -= a;
    }
    idx as u64
}

fn decode_index_fast(mut idx: u128, n: usize, mut k: u32) -> Vec<i32> {
    let mut y = vec![0i32; n];
    for (i, slot) in y.iter_mut().enumerate() {
        let rest = n - i - 1;
        let zero = codebook_size_sat(rest, k);
        if idx < zero {
            continue;
        }
        idx -= zero;
        let mut a = 1;
        loop {
            let c = codebook_size_sat(rest, k - a);
            if idx < c {
                *slot = a as i32;
                break;
            }
            idx -= c;
            if idx < c || a == k {
                *slot = -(a as i32);
                break;
            }
            idx -= c;
            a += 1;
        }
        k -= a;
    }
    y
}

/// Eighth-bit cost of a vector from `S(n, k)`, rounded up.
pub fn pulse_cost(n: usize, k: u32) -> u32 {
    log2_frac_ceil(codebook_size_sat(n, k), 3)
}

/// Largest pulse count whose codebook fits `budget` eighth-bits.
pub fn choose_k(n: usize, budget: i64) -> u32 {
    if n == 0 || budget <= 0 {
        return 0;
    }
    let k_max = if n == 1 { 1 } else { K_MAX };
    let limit = 1u128 << MAX_LEAF_BITS;
    let mut k = 0;
    while k < k_max {
        let v = codebook_size_sat(n, k + 1);
        if v >= limit || log2_frac_ceil(v, 3) as i64 > budget {
            break;
        }
        k += 1;
    }
    k
}

/// Sends or receives one codebook vector; `y` is ignored when decoding.
pub fn code_vector<C: Coder>(coder: &mut C, y: &[i32], n: usize, k: u32) -> Vec<i32> {
    if k == 0 {
        return vec![0; n];
    }
    let v = codebook_size_sat(n, k);
    debug_assert!(v < 1u128 << MAX_LEAF_BITS);
    let idx = if C::ENCODER { encode_index_fast(y) as u32 } else { 0 };
    let got = coder.code_uint(idx, v as u32);
    decode_index_fast(got as u128, n, k)
}

/// Codebook search: the vector of `S(N, K)` whose direction is closest to
/// `x`.
pub fn pvq_search(x: &[f64], k: u32) -> Vec<i32> {
    let n = x.len();
    let mut y = vec![0i32; n];
    if k == 0 || n == 0 {
        return y;
    }
    let ax: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let l1: f64 = ax.iter().sum();
    let mut placed = 0u32;
    let (mut xy, mut yy) = (0.0f64, 0.0f64);
    if l1 > 1e-15 && k as usize > n / 2 {
        let scale = (k as f64 - 1.0) / l1;
        for i in 0..n {
            let v = (ax[i] * scale).floor() as i32;
            y[i] = v;
            placed += v as u32;
            xy += ax[i] * v as f64;
            yy += (v * v) as f64;
        }
    }
    if placed > k {
        y.iter_mut().for_each(|v| *v = 0);
        placed = 0;
        xy = 0.0;
        yy = 0.0;
    }
    while placed < k {
        let mut best = 0;
        let mut best_num = -1.0f64;
        let mut best_den = 1.0f64;
        for i in 0..n {
            let num = xy + ax[i];
            let num = num * num;
            let den = yy + 2.0 * y[i] as f64 + 1.0;
            if num * best_den > best_num * den {
                best = i;
                best_num = num;
                best_den = den;
            }
        }
        xy += ax[best];
        yy += 2.0 * y[best] as f64 + 1.0;
        y[best] += 1;
        placed += 1;
    }
    for i in 0..n {
        if x[i] < 0.0 {
            y[i] = -y[i];
        }
    }
    y
}

/// `y / ||y||` as floats.
pub fn normalized(y: &[i32]) -> Vec<f64> {
    let e: f64 = y.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
    if e == 0.0 {
        return vec![0.0; y.len()];
    }
    y.iter().map(|&v| v as f64 / e).collect()
}
