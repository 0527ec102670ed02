//! Dense linear algebra over GF(2).
//!
//! Addition is XOR and multiplication is AND. Matrices are small (the
//! toy McEliece instances top out at a few thousand entries), so storage
//! is a plain row-major byte vector holding 0 or 1 per entry.

use std::fmt;

use rand::Rng;

use crate::error::{dims, Error, Result};

/// A dense matrix over GF(2).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            bits: vec![0; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m.bits[i * dim + i] = 1;
        }
        m
    }

    /// Builds a matrix from row-major bits, rejecting anything other than 0/1.
    pub fn from_bits(rows: usize, cols: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} bits", rows * cols),
                actual: format!("{} bits", bits.len()),
            });
        }
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::NotABit(b));
        }
        Ok(Self { rows, cols, bits })
    }

    /// Builds a matrix from a slice of equal-length rows.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut bits = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: format!("row of length {cols}"),
                    actual: format!("row of length {}", row.len()),
                });
            }
            bits.extend_from_slice(row);
        }
        Self::from_bits(rows.len(), cols, bits)
    }

    /// A 1×n matrix holding `bits`.
    pub fn row_vector(bits: &[u8]) -> Result<Self> {
        Self::from_bits(1, bits.len(), bits.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.bits[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, bit: bool) {
        self.bits[row * self.cols + col] = u8::from(bit);
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.bits[row * self.cols..(row + 1) * self.cols]
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.bits
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    /// Matrix product, accumulating AND terms with XOR.
    pub fn mul(&self, other: &BitMatrix) -> Result<BitMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows on the right operand", self.cols),
                actual: dims(other.rows, other.cols),
            });
        }
        let mut out = BitMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let acc = &mut out.bits[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                if self.bits[i * self.cols + k] == 1 {
                    for (a, b) in acc.iter_mut().zip(other.row(k)) {
                        *a ^= b;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Elementwise XOR.
    pub fn add(&self, other: &BitMatrix) -> Result<BitMatrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: dims(self.rows, self.cols),
                actual: dims(other.rows, other.cols),
            });
        }
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(BitMatrix {
            rows: self.rows,
            cols: self.cols,
            bits,
        })
    }

    pub fn transpose(&self) -> BitMatrix {
        let mut out = BitMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.bits[j * self.rows + i] = self.get(i, j);
            }
        }
        out
    }

    /// Inverse by Gauss–Jordan elimination on `[A | I]`.
    ///
    /// Pivots are chosen column by column, left to right, taking the
    /// topmost row at or below the current position that has a 1.
    pub fn invert(&self) -> Result<BitMatrix> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch {
                expected: "square matrix".into(),
                actual: dims(self.rows, self.cols),
            });
        }
        let n = self.rows;
        let mut work: Vec<Vec<u8>> = (0..n)
            .map(|i| {
                let mut row = self.row(i).to_vec();
                row.extend((0..n).map(|j| u8::from(i == j)));
                row
            })
            .collect();

        for col in 0..n {
            let pivot = (col..n).find(|&r| work[r][col] == 1).ok_or(Error::Singular)?;
            work.swap(col, pivot);
            let pivot_row = work[col].clone();
            for (r, row) in work.iter_mut().enumerate() {
                if r != col && row[col] == 1 {
                    for (a, b) in row.iter_mut().zip(&pivot_row) {
                        *a ^= b;
                    }
                }
            }
        }

        let bits = work.into_iter().flat_map(|row| row[n..].to_vec()).collect();
        Ok(BitMatrix {
            rows: n,
            cols: n,
            bits,
        })
    }

    pub fn is_invertible(&self) -> bool {
        self.invert().is_ok()
    }

    /// True if every row and every column holds exactly one 1.
    pub fn is_permutation(&self) -> bool {
        if !self.is_square() {
            return false;
        }
        let n = self.rows;
        let rows_ok = (0..n).all(|i| self.row(i).iter().map(|&b| b as usize).sum::<usize>() == 1);
        let cols_ok = (0..n).all(|j| (0..n).map(|i| self.get(i, j) as usize).sum::<usize>() == 1);
        rows_ok && cols_ok
    }

    /// A uniformly random invertible `dim × dim` matrix.
    ///
    /// Draws uniform matrices until one is invertible; a uniform square
    /// matrix over GF(2) is invertible with probability above 0.288.
    pub fn random_invertible<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<BitMatrix> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        loop {
            let bits = (0..dim * dim).map(|_| rng.gen_range(0..2u8)).collect();
            let candidate = BitMatrix {
                rows: dim,
                cols: dim,
                bits,
            };
            if candidate.is_invertible() {
                return Ok(candidate);
            }
        }
    }

    /// A uniformly random `dim × dim` permutation matrix.
    pub fn random_permutation<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<BitMatrix> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        let mut order: Vec<usize> = (0..dim).collect();
        // Fisher–Yates, written out so the draw sequence is pinned to this crate.
        for i in (1..dim).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut out = BitMatrix::zeros(dim, dim);
        for (i, &j) in order.iter().enumerate() {
            out.set(i, j, true);
        }
        Ok(out)
    }
}

impl fmt::Display for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}", format_bits(self.row(i)))?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        fmt::Display::fmt(self, f)
    }
}

/// Formats a bit vector as `[1 0 1]`.
pub fn format_bits(bits: &[u8]) -> String {
    let inner: Vec<String> = bits.iter().map(|b| b.to_string()).collect();
    format!("[{}]", inner.join(" "))
}

/// Parses a string of `0`/`1` characters, ignoring spaces, commas and brackets.
pub fn parse_bits(text: &str) -> Result<Vec<u8>> {
    text.chars()
        .filter(|c| !matches!(c, ' ' | ',' | '[' | ']' | '\t'))
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::InvalidArgument(format!(
                "unexpected character {other:?} in bit string"
            ))),
        })
        .collect()
}
