//! Finite binary sequences.
//!
//! A [`BitString`] is the object every sequence-level operation works on.
//! Bits are stored unpacked (one byte per bit) — simple, and cheap enough at
//! the lengths this crate targets. Byte-oriented constructors use MSB-first
//! bit order, matching the CLI's `raw-bytes-msb-first` input format.

use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<u8>, // each element is 0 or 1
}

impl BitString {
    /// The empty sequence (n = 0). Valid everywhere; probabilities of the
    /// empty product are 1.
    pub fn empty() -> Self {
        BitString { bits: Vec::new() }
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::input(format!(
                "bit value {} at position {pos} (want 0 or 1)",
                bits[pos]
            )));
        }
        Ok(BitString { bits })
    }

    /// Parse an ASCII `0`/`1` string. Reports the byte offset of the first
    /// offending character.
    pub fn from_ascii01(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for (off, ch) in s.bytes().enumerate() {
            match ch {
                b'0' => bits.push(0),
                b'1' => bits.push(1),
                _ => {
                    return Err(Error::input(format!(
                        "invalid character {:?} at byte offset {off} (want '0' or '1')",
                        ch as char
                    )))
                }
            }
        }
        Ok(BitString { bits })
    }

    /// Unpack bytes MSB-first: byte 0xA0 becomes bits 1,0,1,0,0,0,0,0.
    pub fn from_bytes_msb(bytes: &[u8]) -> Self {
        let mut bits = Vec::with_capacity(bytes.len() * 8);
        for byte in bytes {
            for shift in (0..8).rev() {
                bits.push((byte >> shift) & 1);
            }
        }
        BitString { bits }
    }

    /// Repack into bytes MSB-first, zero-padding the final partial byte.
    /// Inverse of [`from_bytes_msb`] when the length is a multiple of 8.
    pub fn to_bytes_msb(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.bits.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            out[i / 8] |= b << (7 - (i % 8));
        }
        out
    }

    /// All-zero (or all-one) sequence of length n.
    pub fn repeated(bit: u8, n: usize) -> Self {
        debug_assert!(bit <= 1);
        BitString { bits: vec![bit; n] }
    }

    /// The sequence whose bits are the big-endian binary expansion of `value`
    /// over exactly `n` bits. Handy for exhaustive enumeration of 2^(n).
    pub fn from_index(value: u64, n: usize) -> Self {
        assert!(n <= 64);
        let mut bits = Vec::with_capacity(n);
        for shift in (0..n).rev() {
            bits.push(((value >> shift) & 1) as u8);
        }
        BitString { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of ones — the count statistic k.
    pub fn count_ones(&self) -> u64 {
        self.bits.iter().map(|&b| b as u64).sum()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        self.bits.iter().copied()
    }

    /// Copy of the half-open window [start, start+len).
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.bits.len() {
            return Err(Error::input(format!(
                "window [{start}, {}) exceeds sequence length {}",
                start + len,
                self.bits.len()
            )));
        }
        Ok(BitString {
            bits: self.bits[start..start + len].to_vec(),
        })
    }

    pub fn to_ascii01(&self) -> String {
        self.bits.iter().map(|&b| (b'0' + b) as char).collect()
    }
}

impl FromStr for BitString {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BitString::from_ascii01(s)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ascii01())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}
