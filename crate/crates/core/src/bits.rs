//! Packed binary sequences.
//!
//! Series run to a few hundred kilosamples, so bits are stored 64 per word.
//! The word layout is exposed to the extractor, which does its GF(2) inner
//! products with XOR/AND + popcount over whole words.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Magic bytes of the packed-bit file format.
pub const BITS_MAGIC: &[u8; 4] = b"BITS";

/// A growable, packed sequence of bits. Bit `i` lives in word `i / 64`,
/// position `i % 64` (LSB first).
#[derive(Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bits {
    words: Vec<u64>,
    len: usize,
}

impl Bits {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            words: Vec::with_capacity(bits.div_ceil(64)),
            len: 0,
        }
    }

    /// Builds from one byte per bit (0 or 1); any nonzero byte counts as 1.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut out = Self::with_capacity(bits.len());
        for &b in bits {
            out.push(b != 0);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, bit: bool) {
        let w = self.len / 64;
        if w == self.words.len() {
            self.words.push(0);
        }
        if bit {
            self.words[w] |= 1u64 << (self.len % 64);
        }
        self.len += 1;
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Underlying words; bits past `len` in the last word are zero.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Reads 64 bits starting at bit offset `start` (zero-padded past the end).
    #[inline]
    pub fn word_at(&self, start: usize) -> u64 {
        let w = start / 64;
        let sh = start % 64;
        let lo = self.words.get(w).copied().unwrap_or(0);
        if sh == 0 {
            lo
        } else {
            let hi = self.words.get(w + 1).copied().unwrap_or(0);
            (lo >> sh) | (hi << (64 - sh))
        }
    }

    /// Copies a sub-range out as a new `Bits`.
    pub fn slice(&self, start: usize, len: usize) -> Bits {
        assert!(start + len <= self.len);
        let mut words = Vec::with_capacity(len.div_ceil(64));
        let mut off = start;
        let mut remaining = len;
        while remaining > 0 {
            let take = remaining.min(64);
            let mut w = self.word_at(off);
            if take < 64 {
                w &= (1u64 << take) - 1;
            }
            words.push(w);
            off += take;
            remaining -= take;
        }
        Bits { words, len }
    }

    /// Unpacks to one `u8` per bit.
    pub fn to_bit_bytes(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.get(i) as u8).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Serializes to the packed-bit file format: magic, u64 LE bit count,
    /// then the packed words as little-endian bytes.
    pub fn to_file_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.words.len() * 8);
        out.extend_from_slice(BITS_MAGIC);
        out.extend_from_slice(&(self.len as u64).to_le_bytes());
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_file_bytes(data: &[u8]) -> Result<Self, BitsFileError> {
        if data.len() < 12 || &data[..4] != BITS_MAGIC {
            return Err(BitsFileError::BadMagic);
        }
        let len = u64::from_le_bytes(data[4..12].try_into().unwrap()) as usize;
        let n_words = len.div_ceil(64);
        if data.len() != 12 + n_words * 8 {
            return Err(BitsFileError::Truncated);
        }
        let mut words = Vec::with_capacity(n_words);
        for i in 0..n_words {
            let s = 12 + i * 8;
            words.push(u64::from_le_bytes(data[s..s + 8].try_into().unwrap()));
        }
        if let Some(last) = words.last() {
            let tail = len % 64;
            if tail != 0 && last >> tail != 0 {
                return Err(BitsFileError::Truncated);
            }
        }
        Ok(Bits { words, len })
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits[{}; ", self.len)?;
        for i in 0..self.len.min(64) {
            write!(f, "{}", self.get(i) as u8)?;
        }
        if self.len > 64 {
            write!(f, "…")?;
        }
        write!(f, "]")
    }
}

impl FromIterator<bool> for Bits {
    fn from_iter<T: IntoIterator<Item = bool>>(iter: T) -> Self {
        let mut out = Bits::new();
        for b in iter {
            out.push(b);
        }
        out
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BitsFileError {
    #[error("missing BITS magic")]
    BadMagic,
    #[error("file length inconsistent with bit count")]
    Truncated,
}
