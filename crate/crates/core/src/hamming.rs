//! Hamming single-error-correcting codes.
//!
//! Codewords are row vectors: `y = xG`, `x = yR`, syndrome `z = yH`. Row `i`
//! of `H` (1-based) is the binary encoding of `i` with component `j` carrying
//! weight `2^(j-1)`, so a nonzero syndrome read as an integer is the position
//! of a single flipped bit.
//!
//! A weight-2 or heavier error produces a nonzero syndrome that points at the
//! wrong bit; [`HammingCode::correct`] flips it anyway. Distance-3 codes cannot
//! detect that case.

use crate::error::{Error, Result};
use crate::gf2::BitMatrix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HammingCode {
    k: usize,
    n: usize,
    generator: BitMatrix,
    parity_check: BitMatrix,
    decoder: BitMatrix,
}

/// Result of syndrome decoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correction {
    pub corrected: Vec<u8>,
    /// 1-based position of the flipped bit, if any.
    pub error_position: Option<usize>,
}

impl HammingCode {
    /// The (7,4) code with the generator, parity-check and decode matrices
    /// used in the classic worked example.
    pub fn standard_7_4() -> Self {
        let generator = BitMatrix::from_rows(&[
            [1, 1, 1, 0, 0, 0, 0],
            [1, 0, 0, 1, 1, 0, 0],
            [0, 1, 0, 1, 0, 1, 0],
            [1, 1, 0, 1, 0, 0, 1],
        ])
        .expect("static generator");
        let parity_check = BitMatrix::from_rows(&[
            [1, 0, 0],
            [0, 1, 0],
            [1, 1, 0],
            [0, 0, 1],
            [1, 0, 1],
            [0, 1, 1],
            [1, 1, 1],
        ])
        .expect("static parity check");
        let decoder = BitMatrix::from_rows(&[
            [0, 0, 0, 0],
            [0, 0, 0, 0],
            [1, 0, 0, 0],
            [0, 0, 0, 0],
            [0, 1, 0, 0],
            [0, 0, 1, 0],
            [0, 0, 0, 1],
        ])
        .expect("static decoder");
        Self {
            k: 4,
            n: 7,
            generator,
            parity_check,
            decoder,
        }
    }

    /// Builds the `(2^r - 1, 2^r - 1 - r)` code for `r >= 3` parity bits.
    ///
    /// Data bits sit at the positions that are not powers of two, in
    /// ascending order; parity bits sit at positions `1, 2, 4, ...`.
    pub fn construct(parity_bits: usize) -> Result<Self> {
        if !(3..=16).contains(&parity_bits) {
            return Err(Error::InvalidArgument(format!(
                "parity bit count must be in 3..=16, got {parity_bits}"
            )));
        }
        let r = parity_bits;
        let n = (1usize << r) - 1;
        let k = n - r;

        let mut parity_check = BitMatrix::zeros(n, r);
        for pos in 1..=n {
            for j in 0..r {
                parity_check.set(pos - 1, j, (pos >> j) & 1 == 1);
            }
        }

        let data_positions: Vec<usize> = (1..=n).filter(|p| !p.is_power_of_two()).collect();
        let mut generator = BitMatrix::zeros(k, n);
        let mut decoder = BitMatrix::zeros(n, k);
        for (t, &pos) in data_positions.iter().enumerate() {
            generator.set(t, pos - 1, true);
            for j in 0..r {
                if (pos >> j) & 1 == 1 {
                    generator.set(t, (1 << j) - 1, true);
                }
            }
            decoder.set(pos - 1, t, true);
        }

        Ok(Self {
            k,
            n,
            generator,
            parity_check,
            decoder,
        })
    }

    /// Assembles a code from explicit matrices, checking the structural invariants.
    pub fn from_matrices(
        generator: BitMatrix,
        parity_check: BitMatrix,
        decoder: BitMatrix,
    ) -> Result<Self> {
        let (k, n) = (generator.rows(), generator.cols());
        let shapes_ok = parity_check.rows() == n
            && decoder.rows() == n
            && decoder.cols() == k
            && n > k
            && parity_check.cols() == n - k;
        if !shapes_ok {
            return Err(Error::InvalidArgument(format!(
                "inconsistent code shapes: G {}x{}, H {}x{}, R {}x{}",
                generator.rows(),
                generator.cols(),
                parity_check.rows(),
                parity_check.cols(),
                decoder.rows(),
                decoder.cols()
            )));
        }
        let code = Self {
            k,
            n,
            generator,
            parity_check,
            decoder,
        };
        if !code.generator.mul(&code.parity_check)?.is_zero() {
            return Err(Error::InvalidArgument("G·H is not zero".into()));
        }
        if code.generator.mul(&code.decoder)? != BitMatrix::identity(k) {
            return Err(Error::InvalidArgument("G·R is not the identity".into()));
        }
        for pos in 1..=n {
            if code.position_of(code.parity_check.row(pos - 1)) != pos {
                return Err(Error::InvalidArgument(format!(
                    "row {pos} of H does not encode its position"
                )));
            }
        }
        Ok(code)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generator(&self) -> &BitMatrix {
        &self.generator
    }

    pub fn parity_check(&self) -> &BitMatrix {
        &self.parity_check
    }

    pub fn decoder(&self) -> &BitMatrix {
        &self.decoder
    }

    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        check_len(message, self.k)?;
        Ok(BitMatrix::row_vector(message)?.mul(&self.generator)?.into_bits())
    }

    pub fn decode(&self, codeword: &[u8]) -> Result<Vec<u8>> {
        check_len(codeword, self.n)?;
        Ok(BitMatrix::row_vector(codeword)?.mul(&self.decoder)?.into_bits())
    }

    pub fn syndrome(&self, word: &[u8]) -> Result<Vec<u8>> {
        check_len(word, self.n)?;
        Ok(BitMatrix::row_vector(word)?.mul(&self.parity_check)?.into_bits())
    }

    /// Flips the bit named by the syndrome, if it is nonzero.
    pub fn correct(&self, word: &[u8]) -> Result<Correction> {
        let z = self.syndrome(word)?;
        let pos = self.position_of(&z);
        let mut corrected = word.to_vec();
        if pos == 0 {
            return Ok(Correction {
                corrected,
                error_position: None,
            });
        }
        corrected[pos - 1] ^= 1;
        Ok(Correction {
            corrected,
            error_position: Some(pos),
        })
    }

    fn position_of(&self, syndrome: &[u8]) -> usize {
        syndrome
            .iter()
            .enumerate()
            .map(|(j, &b)| usize::from(b) << j)
            .sum()
    }
}

fn check_len(bits: &[u8], expected: usize) -> Result<()> {
    if bits.len() != expected {
        return Err(Error::DimensionMismatch {
            expected: format!("{expected} bits"),
            actual: format!("{} bits", bits.len()),
        });
    }
    Ok(())
}

/// All `2^len` bit vectors of length `len`, in counting order.
pub fn all_words(len: usize) -> impl Iterator<Item = Vec<u8>> {
    (0..1usize << len).map(move |v| (0..len).map(|i| ((v >> i) & 1) as u8).collect())
}
