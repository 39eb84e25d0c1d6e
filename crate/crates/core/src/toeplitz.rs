//! Toeplitz hashing extractor over GF(2).
//!
//! An m×n Toeplitz matrix is fixed by its first row and first column, n+m-1
//! raw bits in total; every diagonal is constant. Extraction multiplies the
//! matrix by an n-bit seed vector over GF(2), hashing n further raw bits down
//! to m output bits. The default block is m = n = 2^14, so one block consumes
//! 2n+m-1 = 49151 raw bits and emits 16384.

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::series::{BitSeries, Provenance};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ToeplitzError {
    #[error("need {need} raw bits, got {got}")]
    InsufficientBits { need: usize, got: usize },
    #[error("seed length {got} does not match n = {expect}")]
    LengthMismatch { expect: usize, got: usize },
    #[error("matrix dimensions must be at least 1")]
    EmptyDims,
}

pub const DEFAULT_DIM: usize = 1 << 14;

/// Toeplitz matrix stored by its anti-ordered diagonals:
/// entry(i, j) = diagonals[i - j + n - 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToeplitzMatrix {
    pub rows: usize,
    pub cols: usize,
    diagonals: Bits,
    /// The diagonals reversed, so row i is the window starting at bit
    /// (rows - 1 - i); lets the row-seed product run on whole words.
    reversed: Bits,
}

impl ToeplitzMatrix {
    /// Builds from raw bits: the first row takes `cols` bits from `offset`,
    /// the rest of the first column takes the next `rows - 1`.
    pub fn from_raw(
        raw: &Bits,
        rows: usize,
        cols: usize,
        offset: usize,
    ) -> Result<(Self, usize), ToeplitzError> {
        if rows == 0 || cols == 0 {
            return Err(ToeplitzError::EmptyDims);
        }
        let consumed = rows + cols - 1;
        if raw.len() < offset + consumed {
            return Err(ToeplitzError::InsufficientBits {
                need: offset + consumed,
                got: raw.len(),
            });
        }
        // diagonals[n-1-j] = row bit j; diagonals[n-1+i] = column bit i
        let mut diagonals = Bits::with_capacity(consumed);
        for k in 0..consumed {
            let bit = if k < cols {
                raw.get(offset + cols - 1 - k) // first row, reversed
            } else {
                raw.get(offset + k) // rest of the first column
            };
            diagonals.push(bit);
        }
        let reversed = (0..consumed).rev().map(|k| diagonals.get(k)).collect();
        Ok((
            ToeplitzMatrix {
                rows,
                cols,
                diagonals,
                reversed,
            },
            consumed,
        ))
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> bool {
        debug_assert!(i < self.rows && j < self.cols);
        self.diagonals.get(i + self.cols - 1 - j)
    }

    pub fn first_row(&self) -> Vec<bool> {
        (0..self.cols).map(|j| self.entry(0, j)).collect()
    }

    pub fn first_column(&self) -> Vec<bool> {
        (0..self.rows).map(|i| self.entry(i, 0)).collect()
    }

    /// GF(2) matrix-vector product: out[i] = XOR_j entry(i,j) & seed[j].
    /// Row i of the matrix is a length-`cols` window of the reversed
    /// diagonals, so each output bit is an AND + popcount over words.
    pub fn extract(&self, seed: &Bits) -> Result<Bits, ToeplitzError> {
        if seed.len() != self.cols {
            return Err(ToeplitzError::LengthMismatch {
                expect: self.cols,
                got: seed.len(),
            });
        }
        let seed_words = seed.words();
        let n_words = self.cols.div_ceil(64);
        let tail_bits = self.cols % 64;
        let mut out = Bits::with_capacity(self.rows);
        for i in 0..self.rows {
            let start = self.rows - 1 - i;
            let mut acc = 0u32;
            for (w, &sw) in seed_words.iter().enumerate().take(n_words) {
                let mut window = self.reversed.word_at(start + w * 64);
                if w == n_words - 1 && tail_bits != 0 {
                    window &= (1u64 << tail_bits) - 1;
                }
                acc ^= (window & sw).count_ones();
            }
            out.push(acc & 1 == 1);
        }
        Ok(out)
    }
}

/// Extracts as many blocks as the raw series affords. By default every block
/// rebuilds its matrix from the next n+m-1 raw bits and seeds with the n
/// after that (2n+m-1 consumed per block); with `freeze_matrix` one matrix is
/// built from the first n+m-1 bits and each further block consumes only an
/// n-bit seed.
pub fn extract_series_with(
    raw: &BitSeries,
    rows: usize,
    cols: usize,
    freeze_matrix: bool,
) -> Result<BitSeries, ToeplitzError> {
    let first_block = 2 * cols + rows - 1;
    if raw.bits.len() < first_block {
        return Err(ToeplitzError::InsufficientBits {
            need: first_block,
            got: raw.bits.len(),
        });
    }
    let mut out = Bits::new();
    let mut frozen: Option<ToeplitzMatrix> = None;
    let mut offset = 0;
    loop {
        let matrix = match (&frozen, freeze_matrix) {
            (Some(m), true) => m.clone(),
            _ => {
                if raw.bits.len() < offset + rows + cols - 1 + cols {
                    break;
                }
                let (m, consumed) = ToeplitzMatrix::from_raw(&raw.bits, rows, cols, offset)?;
                offset += consumed;
                if freeze_matrix {
                    frozen = Some(m.clone());
                }
                m
            }
        };
        if raw.bits.len() < offset + cols {
            break;
        }
        let seed = raw.bits.slice(offset, cols);
        offset += cols;
        let block = matrix.extract(&seed)?;
        for b in block.iter() {
            out.push(b);
        }
    }
    Ok(BitSeries {
        bits: out,
        provenance: Provenance {
            extracted: true,
            ..raw.provenance.clone()
        },
    })
}

/// `extract_series_with` rebuilding the matrix per block.
pub fn extract_series(
    raw: &BitSeries,
    rows: usize,
    cols: usize,
) -> Result<BitSeries, ToeplitzError> {
    extract_series_with(raw, rows, cols, false)
}
