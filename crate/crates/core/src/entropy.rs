//! Range coder with raw bits packed backward from the end of the buffer.
//!
//! The front of the frame buffer holds range-coded bytes, the back holds raw
//! bits written LSB-first towards the front. The termination rule emits just
//! enough bytes to disambiguate the final interval so that the decoder is
//! correct no matter what the raw-bit region contains.
//!
//! Registers are 32 bits wide with byte-wise renormalization. Carries are
//! resolved by buffering one byte plus a count of outstanding `0xFF` bytes.

use crate::error::{Error, Result};

const SYM_BITS: u32 = 8;
const SYM_MAX: u32 = (1 << SYM_BITS) - 1;
const CODE_BITS: u32 = 32;
const CODE_TOP: u32 = 1 << (CODE_BITS - 1);
const CODE_BOT: u32 = CODE_TOP >> SYM_BITS;
const CODE_SHIFT: u32 = CODE_BITS - SYM_BITS - 1;
const CODE_EXTRA: u32 = (CODE_BITS - 2) % SYM_BITS + 1;
const WINDOW_BITS: u32 = 32;

/// Maximum `total` accepted by [`RangeEncoder::encode`].
pub const MAX_TOTAL: u32 = 1 << 16;
/// Maximum number of raw bits in one `write_bits` call.
pub const MAX_RAW_BITS: u32 = 25;

/// Number of bits needed to represent `x` (0 for 0).
#[inline]
pub fn ilog(x: u32) -> u32 {
    32 - x.leading_zeros()
}

/// Bits consumed so far in 1/8-bit units, rounded up.
fn tell_frac_of(nbits_total: u32, rng: u32) -> u32 {
    let nbits = nbits_total << 3;
    let mut l = ilog(rng);
    let mut r = rng >> (l - 16);
    for _ in 0..3 {
        r = (r * r) >> 15;
        let b = r >> 16;
        l = (l << 1) | b;
        r >>= b;
    }
    nbits - l
}

#[derive(Debug, Clone)]
pub struct RangeEncoder {
    buf: Vec<u8>,
    offs: usize,
    end_offs: usize,
    end_window: u32,
    nend_bits: u32,
    nbits_total: u32,
    low: u32,
    rng: u32,
    rem: i32,
    ext: u32,
    overflow: bool,
}

impl RangeEncoder {
    /// Creates an encoder that will produce exactly `capacity` bytes.
    pub fn new(capacity: usize) -> Self {
        Self {
            buf: vec![0; capacity],
            offs: 0,
            end_offs: 0,
            end_window: 0,
            nend_bits: 0,
            nbits_total: CODE_BITS + 1,
            low: 0,
            rng: CODE_TOP,
            rem: -1,
            ext: 0,
            overflow: false,
        }
    }

    pub fn capacity(&self) -> usize {
        self.buf.len()
    }

    /// True once any write collided with the other end of the buffer.
    pub fn overflowed(&self) -> bool {
        self.overflow
    }

    fn write_byte(&mut self, b: u32) {
        if self.offs + self.end_offs >= self.buf.len() {
            self.overflow = true;
        } else {
            self.buf[self.offs] = b as u8;
            self.offs += 1;
        }
    }

    fn write_byte_at_end(&mut self, b: u32) {
        if self.offs + self.end_offs >= self.buf.len() {
            self.overflow = true;
        } else {
            self.end_offs += 1;
            let at = self.buf.len() - self.end_offs;
            self.buf[at] = b as u8;
        }
    }

    fn carry_out(&mut self, c: u32) {
        if c != SYM_MAX {
            let carry = c >> SYM_BITS;
            if self.rem >= 0 {
                self.write_byte(self.rem as u32 + carry);
            }
            if self.ext > 0 {
                let sym = (SYM_MAX + carry) & SYM_MAX;
                while self.ext > 0 {
                    self.write_byte(sym);
                    self.ext -= 1;
                }
            }
            self.rem = (c & SYM_MAX) as i32;
        } else {
            self.ext += 1;
        }
    }

    fn normalize(&mut self) {
        while self.rng <= CODE_BOT {
            self.carry_out(self.low >> CODE_SHIFT);
            self.low = (self.low << SYM_BITS) & (CODE_TOP - 1);
            self.rng <<= SYM_BITS;
            self.nbits_total += SYM_BITS;
        }
    }

    /// Narrows the interval to `[cum_lo, cum_hi) / total`.
    pub fn encode(&mut self, cum_lo: u32, cum_hi: u32, total: u32) {
        debug_assert!(cum_lo < cum_hi && cum_hi <= total && total <= MAX_TOTAL);
        let r = self.rng / total;
        if cum_lo > 0 {
            self.low = self.low.wrapping_add(self.rng - r * (total - cum_lo));
            self.rng = r * (cum_hi - cum_lo);
        } else {
            self.rng -= r * (total - cum_hi);
        }
        self.normalize();
    }

    /// Encodes a binary symbol whose probability of being `true` is `2^-logp`.
    pub fn encode_bit_logp(&mut self, val: bool, logp: u32) {
        let s = self.rng >> logp;
        let r = self.rng - s;
        if val {
            self.low = self.low.wrapping_add(r);
        }
        self.rng = if val { s } else { r };
        self.normalize();
    }

    /// Encodes `value` uniformly in `[0, total)`. Totals above 256 keep the
    /// eight most significant bits in the range coder and send the rest raw.
    pub fn encode_uint(&mut self, value: u32, total: u32) {
        debug_assert!(total > 1 && value < total);
        let ft = total - 1;
        let ftb = ilog(ft);
        if ftb > 8 {
            let shift = ftb - 8;
            let ft1 = (ft >> shift) + 1;
            let hi = value >> shift;
            self.encode(hi, hi + 1, ft1);
            self.write_bits(value & ((1 << shift) - 1), shift);
        } else {
            self.encode(value, value + 1, total);
        }
    }

    /// Appends `nbits` raw bits at the back of the buffer.
    pub fn write_bits(&mut self, value: u32, nbits: u32) {
        debug_assert!(nbits <= MAX_RAW_BITS);
        debug_assert!(nbits == 32 || value >> nbits == 0);
        if nbits == 0 {
            return;
        }
        let mut window = self.end_window;
        let mut used = self.nend_bits;
        if used + nbits > WINDOW_BITS {
            loop {
                self.write_byte_at_end(window & SYM_MAX);
                window >>= SYM_BITS;
                used -= SYM_BITS;
                if used < SYM_BITS {
                    break;
                }
            }
        }
        window |= value << used;
        used += nbits;
        self.end_window = window;
        self.nend_bits = used;
        self.nbits_total += nbits;
    }

    /// Whole bits used so far, rounded up.
    pub fn tell(&self) -> u32 {
        self.nbits_total - ilog(self.rng)
    }

    /// Bits used so far in 1/8-bit units; an upper bound on the flush cost.
    pub fn tell_frac(&self) -> u32 {
        tell_frac_of(self.nbits_total, self.rng)
    }

    /// Flushes the coder and returns exactly `capacity` bytes.
    pub fn finish(mut self) -> Result<Vec<u8>> {
        let mut l = (CODE_BITS - ilog(self.rng)) as i32;
        let mut msk = (CODE_TOP - 1) >> l;
        let mut end = self.low.wrapping_add(msk) & !msk;
        if (end | msk) >= self.low.wrapping_add(self.rng) {
            l += 1;
            msk >>= 1;
            end = self.low.wrapping_add(msk) & !msk;
        }
        while l > 0 {
            self.carry_out(end >> CODE_SHIFT);
            end = (end << SYM_BITS) & (CODE_TOP - 1);
            l -= SYM_BITS as i32;
        }
        if self.rem >= 0 || self.ext > 0 {
            self.carry_out(0);
        }
        let mut window = self.end_window;
        let mut used = self.nend_bits;
        while used >= SYM_BITS {
            self.write_byte_at_end(window & SYM_MAX);
            window >>= SYM_BITS;
            used -= SYM_BITS;
        }
        if !self.overflow {
            let cap = self.buf.len();
            for b in &mut self.buf[self.offs..cap - self.end_offs] {
                *b = 0;
            }
            if used > 0 {
                if self.end_offs >= cap {
                    self.overflow = true;
                } else {
                    let l = -l;
                    if self.offs + self.end_offs >= cap && l < used as i32 {
                        window &= (1 << l) - 1;
                        self.overflow = true;
                    }
                    self.buf[cap - self.end_offs - 1] |= window as u8;
                }
            }
        }
        if self.overflow {
            return Err(Error::BudgetExceeded);
        }
        Ok(self.buf)
    }
}

#[derive(Debug, Clone)]
pub struct RangeDecoder<'a> {
    buf: &'a [u8],
    offs: usize,
    end_offs: usize,
    end_window: u32,
    nend_bits: u32,
    nbits_total: u32,
    val: u32,
    rng: u32,
    rem: u32,
    ext: u32,
    corrupt: bool,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        let mut dec = Self {
            buf,
            offs: 0,
            end_offs: 0,
            end_window: 0,
            nend_bits: 0,
            nbits_total: CODE_BITS + 1 - ((CODE_BITS - CODE_EXTRA) / SYM_BITS) * SYM_BITS,
            val: 0,
            rng: 1 << CODE_EXTRA,
            rem: 0,
            ext: 0,
            corrupt: false,
        };
        dec.rem = dec.read_byte();
        dec.val = dec.rng - 1 - (dec.rem >> (SYM_BITS - CODE_EXTRA));
        dec.normalize();
        dec
    }

    pub fn capacity(&self) -> usize {
        self.buf.len()
    }

    /// Set when a decoded value had to be clamped into range.
    pub fn corrupt(&self) -> bool {
        self.corrupt
    }

    fn read_byte(&mut self) -> u32 {
        if self.offs < self.buf.len() {
            let b = self.buf[self.offs];
            self.offs += 1;
            b as u32
        } else {
            0
        }
    }

    fn read_byte_from_end(&mut self) -> u32 {
        if self.end_offs < self.buf.len() {
            self.end_offs += 1;
            self.buf[self.buf.len() - self.end_offs] as u32
        } else {
            0
        }
    }

    fn normalize(&mut self) {
        while self.rng <= CODE_BOT {
            self.nbits_total += SYM_BITS;
            self.rng <<= SYM_BITS;
            let prev = self.rem;
            self.rem = self.read_byte();
            let sym = ((prev << SYM_BITS) | self.rem) >> (SYM_BITS - CODE_EXTRA);
            self.val = ((self.val << SYM_BITS).wrapping_add(SYM_MAX & !sym)) & (CODE_TOP - 1);
        }
    }

    /// Returns the frequency offset of the next symbol in `[0, total)`.
    /// Must be followed by [`update`](Self::update).
    pub fn decode(&mut self, total: u32) -> u32 {
        self.ext = self.rng / total;
        let s = self.val / self.ext;
        total - (s + 1).min(total)
    }

    /// Commits the interval of the symbol identified after [`decode`](Self::decode).
    pub fn update(&mut self, cum_lo: u32, cum_hi: u32, total: u32) {
        let s = self.ext * (total - cum_hi);
        self.val = self.val.wrapping_sub(s);
        self.rng = if cum_lo > 0 {
            self.ext * (cum_hi - cum_lo)
        } else {
            self.rng - s
        };
        self.normalize();
    }

    pub fn decode_bit_logp(&mut self, logp: u32) -> bool {
        let s = self.rng >> logp;
        let ret = self.val < s;
        if ret {
            self.rng = s;
        } else {
            self.val -= s;
            self.rng -= s;
        }
        self.normalize();
        ret
    }

    pub fn decode_uint(&mut self, total: u32) -> u32 {
        debug_assert!(total > 1);
        let ft = total - 1;
        let ftb = ilog(ft);
        if ftb > 8 {
            let shift = ftb - 8;
            let ft1 = (ft >> shift) + 1;
            let hi = self.decode(ft1);
            self.update(hi, hi + 1, ft1);
            let t = (hi << shift) | self.read_bits(shift);
            if t <= ft {
                t
            } else {
                self.corrupt = true;
                ft
            }
        } else {
            let s = self.decode(total);
            self.update(s, s + 1, total);
            s
        }
    }

    pub fn read_bits(&mut self, nbits: u32) -> u32 {
        debug_assert!(nbits <= MAX_RAW_BITS);
        if nbits == 0 {
            return 0;
        }
        let mut window = self.end_window;
        let mut avail = self.nend_bits;
        if avail < nbits {
            loop {
                window |= self.read_byte_from_end() << avail;
                avail += SYM_BITS;
                if avail > WINDOW_BITS - SYM_BITS {
                    break;
                }
            }
        }
        let ret = window & ((1u32 << nbits) - 1);
        window = if nbits == 32 { 0 } else { window >> nbits };
        self.end_window = window;
        self.nend_bits = avail - nbits;
        self.nbits_total += nbits;
        ret
    }

    pub fn tell(&self) -> u32 {
        self.nbits_total - ilog(self.rng)
    }

    pub fn tell_frac(&self) -> u32 {
        tell_frac_of(self.nbits_total, self.rng)
    }
}

/// Symmetric view over the encoder and decoder.
///
/// Every `code_*` method encodes the supplied value when backed by an encoder
/// and ignores it when backed by a decoder; either way it returns the value
/// the decoder sees. Frame-level logic written against this trait is
/// therefore shared verbatim between both directions.
pub trait Coder {
    const ENCODER: bool;

    fn tell_frac(&self) -> u32;
    fn capacity(&self) -> usize;

    fn code_bit_logp(&mut self, val: bool, logp: u32) -> bool;
    fn code_uint(&mut self, val: u32, total: u32) -> u32;
    fn code_bits(&mut self, val: u32, nbits: u32) -> u32;
    /// Codes a symbol given as a cumulative-frequency table `cdf` with
    /// `cdf[0] = 0` and `cdf[len-1] = total`.
    fn code_cdf(&mut self, sym: usize, cdf: &[u32]) -> usize;
    /// Codes a signed value under a Laplace model; the encoder clamps values
    /// the model cannot represent.
    fn code_laplace(&mut self, val: i32, model: crate::energy::Laplace) -> i32;

    /// Eighth-bits that can still be spent before the buffer is full.
    fn remaining_frac(&self) -> i64 {
        self.capacity() as i64 * 64 - self.tell_frac() as i64
    }
}

impl Coder for RangeEncoder {
    const ENCODER: bool = true;

    fn tell_frac(&self) -> u32 {
        RangeEncoder::tell_frac(self)
    }
    fn capacity(&self) -> usize {
        self.buf.len()
    }
    fn code_bit_logp(&mut self, val: bool, logp: u32) -> bool {
        self.encode_bit_logp(val, logp);
        val
    }
    fn code_uint(&mut self, val: u32, total: u32) -> u32 {
        if total > 1 {
            self.encode_uint(val, total);
        }
        val
    }
    fn code_bits(&mut self, val: u32, nbits: u32) -> u32 {
        self.write_bits(val, nbits);
        val
    }
    fn code_cdf(&mut self, sym: usize, cdf: &[u32]) -> usize {
        let total = cdf[cdf.len() - 1];
        self.encode(cdf[sym], cdf[sym + 1], total);
        sym
    }
    fn code_laplace(&mut self, val: i32, model: crate::energy::Laplace) -> i32 {
        crate::energy::laplace_encode(self, val, model)
    }
}

impl Coder for RangeDecoder<'_> {
    const ENCODER: bool = false;

    fn tell_frac(&self) -> u32 {
        RangeDecoder::tell_frac(self)
    }
    fn capacity(&self) -> usize {
        self.buf.len()
    }
    fn code_bit_logp(&mut self, _val: bool, logp: u32) -> bool {
        self.decode_bit_logp(logp)
    }
    fn code_uint(&mut self, _val: u32, total: u32) -> u32 {
        if total > 1 {
            self.decode_uint(total)
        } else {
            0
        }
    }
    fn code_bits(&mut self, _val: u32, nbits: u32) -> u32 {
        self.read_bits(nbits)
    }
    fn code_cdf(&mut self, _sym: usize, cdf: &[u32]) -> usize {
        let total = cdf[cdf.len() - 1];
        let f = self.decode(total);
        // cdf is small; linear scan
        let mut s = 0;
        while cdf[s + 1] <= f {
            s += 1;
        }
        self.update(cdf[s], cdf[s + 1], total);
        s
    }
    fn code_laplace(&mut self, _val: i32, model: crate::energy::Laplace) -> i32 {
        crate::energy::laplace_decode(self, model)
    }
}

/// Checks the symbol arguments of [`RangeEncoder::encode`].
pub fn check_symbol(cum_lo: u32, cum_hi: u32, total: u32) -> Result<()> {
    if cum_lo >= cum_hi || cum_hi > total || total > MAX_TOTAL || total == 0 {
        return Err(Error::InvalidInput(format!(
            "bad symbol interval [{cum_lo}, {cum_hi}) / {total}"
        )));
    }
    Ok(())
}
