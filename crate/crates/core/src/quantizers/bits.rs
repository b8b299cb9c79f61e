//! Big-endian bit packing for quantizer indices.
//!
//! A vector of `n` indices, each in `0..M`, is packed as the single integer
//! `Σ idx_k · M^(n−1−k)` (first index most significant) written in
//! `⌈n·log₂M⌉` bits, most significant bit first. When `M` is a power of two
//! this is exactly the concatenation of `log₂M`-bit big-endian fields, i.e.
//! `n·log₂M` bits; for other `M` it packs tighter than per-index fields.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Bits needed to store one of `m` values: `⌈log₂ m⌉` (0 for `m ≤ 1`).
pub fn index_bits(m: u64) -> u64 {
    if m <= 1 {
        0
    } else {
        64 - (m - 1).leading_zeros() as u64
    }
}

/// Bits needed to store `n` values, each one of `m`: `⌈n·log₂ m⌉`.
pub fn packed_bits(m: u64, n: usize) -> u64 {
    if m <= 1 || n == 0 {
        return 0;
    }
    if m.is_power_of_two() {
        return n as u64 * m.trailing_zeros() as u64;
    }
    let total = BigUint::from(m).pow(n as u32);
    (total - BigUint::one()).bits()
}

/// Append-only MSB-first bit buffer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_bit(&mut self, bit: bool) {
        let pos = self.len % 8;
        if pos == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().expect("pushed above") |= 0x80 >> pos;
        }
        self.len += 1;
    }

    /// Writes the low `width` bits of `value`, most significant first.
    pub fn push_u64(&mut self, value: u64, width: u64) {
        for k in (0..width).rev() {
            self.push_bit(k < 64 && (value >> k) & 1 == 1);
        }
    }

    pub fn push_big(&mut self, value: &BigUint, width: u64) {
        for k in (0..width).rev() {
            self.push_bit(value.bit(k));
        }
    }

    /// Packs `indices` (each `< m`) in `packed_bits(m, indices.len())` bits.
    pub fn push_indices(&mut self, indices: &[u64], m: u64) {
        let width = packed_bits(m, indices.len());
        if width == 0 {
            return;
        }
        if m.is_power_of_two() {
            let w = index_bits(m);
            indices.iter().for_each(|&i| self.push_u64(i, w));
            return;
        }
        let radix = BigUint::from(m);
        let mut acc = BigUint::zero();
        for &i in indices {
            acc = acc * &radix + BigUint::from(i);
        }
        self.push_big(&acc, width);
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// MSB-first reader over a packed buffer.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        let byte = self
            .bytes
            .get((self.pos / 8) as usize)
            .ok_or_else(|| Error::Payload("read past end of payload".into()))?;
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_u64(&mut self, width: u64) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn read_big(&mut self, width: u64) -> Result<BigUint> {
        let mut v = BigUint::zero();
        for _ in 0..width {
            v <<= 1u32;
            if self.read_bit()? {
                v += BigUint::one();
            }
        }
        Ok(v)
    }

    pub fn read_indices(&mut self, n: usize, m: u64) -> Result<Vec<u64>> {
        let width = packed_bits(m, n);
        if width == 0 {
            return Ok(vec![0; n]);
        }
        if m.is_power_of_two() {
            let w = index_bits(m);
            return (0..n).map(|_| self.read_u64(w)).collect();
        }
        let mut acc = self.read_big(width)?;
        let radix = BigUint::from(m);
        let mut out = vec![0u64; n];
        for slot in out.iter_mut().rev() {
            let digit = &acc % &radix;
            *slot = digit.iter_u64_digits().next().unwrap_or(0);
            acc /= &radix;
        }
        if !acc.is_zero() {
            return Err(Error::Payload("packed index value exceeds its radix range".into()));
        }
        Ok(out)
    }

    pub fn position(&self) -> u64 {
        self.pos
    }
}
