//! Integer approximations shared by encoder and decoder so that every
//! decoder-visible decision is bit-exact across platforms.

/// `floor(2^frac_bits * log2(x))` for `x >= 1`, exact integer arithmetic.
pub fn log2_frac_floor(x: u128, frac_bits: u32) -> u32 {
    assert!(x > 0);
    let l = 128 - x.leading_zeros();
    // top 16 significant bits as a Q15 mantissa in [1, 2)
    let mut r: u64 = if l > 16 { (x >> (l - 16)) as u64 } else { (x << (16 - l)) as u64 };
    let mut res = (l - 1) as u64;
    for _ in 0..frac_bits {
        r = (r * r) >> 15;
        let b = r >> 16;
        res = (res << 1) | b;
        r >>= b;
    }
    res as u32
}

/// `ceil(2^frac_bits * log2(x))`: an upper bound usable for bit budgets.
pub fn log2_frac_ceil(x: u128, frac_bits: u32) -> u32 {
    if x <= 1 {
        return 0;
    }
    if x.is_power_of_two() {
        return (127 - x.leading_zeros()) << frac_bits;
    }
    // truncating the mantissa can only lower the estimate; one extra unit
    // covers both the truncation and the fractional remainder
    log2_frac_floor(x, frac_bits) + 1
}

#[inline]
pub fn frac_mul16(a: i32, b: i32) -> i32 {
    (16384 + a * b) >> 15
}

/// Cosine of `x * pi / 32768` for `x` in `[0, 16384]`, Q15.
pub fn bitexact_cos(x: i32) -> i32 {
    let tmp = (4096 + x * x) >> 13;
    let x2 = tmp;
    let x2 = (32767 - x2) + frac_mul16(x2, -7651 + frac_mul16(x2, 8277 + frac_mul16(-626, x2)));
    1 + x2
}

/// `log2(isin / icos)` in Q11.
pub fn bitexact_log2tan(isin: i32, icos: i32) -> i32 {
    let lc = 32 - (icos as u32).leading_zeros() as i32;
    let ls = 32 - (isin as u32).leading_zeros() as i32;
    let icos = icos << (15 - lc);
    let isin = isin << (15 - ls);
    (ls - lc) * (1 << 11) + frac_mul16(isin, frac_mul16(isin, -2597) + 7932)
        - frac_mul16(icos, frac_mul16(icos, -2597) + 7932)
}
