//! Toy McEliece cryptosystem over a Hamming code.
//!
//! The public key is `G' = S·G·P`. Encryption is `y = x·G' ⊕ r` with `r` of
//! weight at most one. Decryption undoes the factors one at a time:
//! `y·P⁻¹`, syndrome correction, decoding through `R`, then `·S⁻¹`.
//!
//! These parameters offer no security at all. This module exists to make
//! the algebra concrete.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gf2::BitMatrix;
use crate::hamming::HammingCode;

pub const TOY_WARNING: &str =
    "warning: toy cipher, not secure at these parameters (Hamming codes correct a single error)";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    g_prime: BitMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivateKey {
    s: BitMatrix,
    code: HammingCode,
    p: BitMatrix,
    s_inv: BitMatrix,
    p_inv: BitMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub bits: Vec<u8>,
}

/// Every intermediate of a decryption, for display and golden checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecryptTrace {
    /// `y·P⁻¹`
    pub unpermuted: Vec<u8>,
    /// After syndrome correction.
    pub corrected: Vec<u8>,
    pub error_position: Option<usize>,
    /// `x·S`, recovered through the decode matrix.
    pub scrambled: Vec<u8>,
    pub message: Vec<u8>,
}

impl PublicKey {
    pub fn new(g_prime: BitMatrix) -> Self {
        Self { g_prime }
    }

    pub fn g_prime(&self) -> &BitMatrix {
        &self.g_prime
    }

    pub fn k(&self) -> usize {
        self.g_prime.rows()
    }

    pub fn n(&self) -> usize {
        self.g_prime.cols()
    }

    /// `x·G'` with `error_weight` (0 or 1) random bit flips.
    pub fn encrypt<R: Rng + ?Sized>(
        &self,
        message: &[u8],
        rng: &mut R,
        error_weight: usize,
    ) -> Result<Ciphertext> {
        let error = match error_weight {
            0 => None,
            1 => Some(rng.gen_range(1..=self.n())),
            w => {
                return Err(Error::InvalidArgument(format!(
                    "error weight {w} exceeds the single error the code can correct"
                )))
            }
        };
        self.encrypt_with_error(message, error)
    }

    /// Encrypts with an explicit error position (1-based), or none.
    pub fn encrypt_with_error(&self, message: &[u8], error_position: Option<usize>) -> Result<Ciphertext> {
        if message.len() != self.k() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} message bits", self.k()),
                actual: format!("{} bits", message.len()),
            });
        }
        let mut bits = BitMatrix::row_vector(message)?.mul(&self.g_prime)?.into_bits();
        if let Some(pos) = error_position {
            if pos == 0 || pos > bits.len() {
                return Err(Error::InvalidArgument(format!("error position {pos} out of range")));
            }
            bits[pos - 1] ^= 1;
        }
        Ok(Ciphertext { bits })
    }
}

impl PrivateKey {
    /// Assembles a private key from explicit factors, checking that `s` is
    /// invertible and `p` is a permutation of matching size.
    pub fn from_factors(s: BitMatrix, code: HammingCode, p: BitMatrix) -> Result<Self> {
        if s.rows() != code.k() || s.cols() != code.k() {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0} scrambler", code.k()),
                actual: format!("{}x{}", s.rows(), s.cols()),
            });
        }
        if p.rows() != code.n() || !p.is_permutation() {
            return Err(Error::InvalidArgument(format!(
                "P must be a {0}x{0} permutation matrix",
                code.n()
            )));
        }
        let s_inv = s.invert()?;
        let p_inv = p.invert()?;
        Ok(Self {
            s,
            code,
            p,
            s_inv,
            p_inv,
        })
    }

    pub fn public_key(&self) -> PublicKey {
        let g_prime = self
            .s
            .mul(self.code.generator())
            .and_then(|sg| sg.mul(&self.p))
            .expect("factor shapes are validated at construction");
        PublicKey { g_prime }
    }

    pub fn s(&self) -> &BitMatrix {
        &self.s
    }

    pub fn p(&self) -> &BitMatrix {
        &self.p
    }

    pub fn s_inv(&self) -> &BitMatrix {
        &self.s_inv
    }

    pub fn p_inv(&self) -> &BitMatrix {
        &self.p_inv
    }

    pub fn code(&self) -> &HammingCode {
        &self.code
    }

    pub fn decrypt(&self, ciphertext: &Ciphertext) -> Result<Vec<u8>> {
        Ok(self.decrypt_trace(ciphertext)?.message)
    }

    pub fn decrypt_trace(&self, ciphertext: &Ciphertext) -> Result<DecryptTrace> {
        if ciphertext.bits.len() != self.code.n() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} ciphertext bits", self.code.n()),
                actual: format!("{} bits", ciphertext.bits.len()),
            });
        }
        let unpermuted = BitMatrix::row_vector(&ciphertext.bits)?
            .mul(&self.p_inv)?
            .into_bits();
        let fix = self.code.correct(&unpermuted)?;
        let scrambled = self.code.decode(&fix.corrected)?;
        let message = BitMatrix::row_vector(&scrambled)?.mul(&self.s_inv)?.into_bits();
        Ok(DecryptTrace {
            unpermuted,
            corrected: fix.corrected,
            error_position: fix.error_position,
            scrambled,
            message,
        })
    }
}

/// Draws a random scrambler and permutation for `code`.
pub fn keygen<R: Rng + ?Sized>(code: HammingCode, rng: &mut R) -> Result<(PublicKey, PrivateKey)> {
    let s = BitMatrix::random_invertible(code.k(), rng)?;
    let p = BitMatrix::random_permutation(code.n(), rng)?;
    let sk = PrivateKey::from_factors(s, code, p)?;
    Ok((sk.public_key(), sk))
}

/// The scrambler and permutation of the classic (7,4) worked example.
pub fn worked_example_key() -> PrivateKey {
    let s = BitMatrix::from_rows(&[[1, 1, 0, 1], [1, 0, 0, 1], [0, 1, 1, 1], [1, 1, 0, 0]])
        .expect("static S");
    let p = BitMatrix::from_rows(&[
        [0, 1, 0, 0, 0, 0, 0],
        [0, 0, 0, 1, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 1],
        [1, 0, 0, 0, 0, 0, 0],
        [0, 0, 1, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 1, 0],
        [0, 0, 0, 0, 1, 0, 0],
    ])
    .expect("static P");
    PrivateKey::from_factors(s, HammingCode::standard_7_4(), p).expect("valid worked example")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamming::all_words;
    use crate::rng_from_seed;

    const G_PRIME: [[u8; 7]; 4] = [
        [0, 1, 1, 0, 1, 0, 1],
        [1, 0, 0, 0, 1, 0, 1],
        [1, 0, 1, 0, 1, 1, 0],
        [1, 0, 1, 1, 0, 0, 1],
    ];

    #[test]
    fn worked_example_public_key() {
        let sk = worked_example_key();
        assert_eq!(sk.public_key().g_prime(), &BitMatrix::from_rows(&G_PRIME).unwrap());
        assert_eq!(sk.s_inv().row(0), &[1, 1, 0, 1]);
        assert_eq!(
            sk.s_inv(),
            &BitMatrix::from_rows(&[[1, 1, 0, 1], [1, 1, 0, 0], [0, 1, 1, 1], [1, 0, 0, 1]]).unwrap()
        );
    }

    #[test]
    fn identity_factors_give_generator() {
        let code = HammingCode::standard_7_4();
        let sk = PrivateKey::from_factors(BitMatrix::identity(4), code.clone(), BitMatrix::identity(7))
            .unwrap();
        assert_eq!(sk.public_key().g_prime(), code.generator());
    }

    #[test]
    fn worked_example_encrypt_decrypt() {
        let sk = worked_example_key();
        let pk = sk.public_key();
        let ct = pk.encrypt(&[1, 0, 0, 0], &mut rng_from_seed(0), 0).unwrap();
        assert_eq!(ct.bits, vec![0, 1, 1, 0, 1, 0, 1]);
        let trace = sk.decrypt_trace(&ct).unwrap();
        assert_eq!(trace.unpermuted, vec![1, 0, 1, 0, 1, 0, 1]);
        assert_eq!(trace.error_position, None);
        assert_eq!(trace.scrambled, vec![1, 1, 0, 1]);
        assert_eq!(trace.message, vec![1, 0, 0, 0]);
    }

    #[test]
    fn zero_message() {
        let sk = worked_example_key();
        let ct = sk.public_key().encrypt(&[0; 4], &mut rng_from_seed(0), 0).unwrap();
        assert_eq!(ct.bits, vec![0; 7]);
        assert_eq!(sk.decrypt(&ct).unwrap(), vec![0; 4]);
    }

    #[test]
    fn weight_one_error_flips_one_position() {
        let sk = worked_example_key();
        let pk = sk.public_key();
        let mut rng = rng_from_seed(8);
        for x in all_words(4) {
            let clean = pk.encrypt(&x, &mut rng, 0).unwrap();
            let noisy = pk.encrypt(&x, &mut rng, 1).unwrap();
            let distance = clean.bits.iter().zip(&noisy.bits).filter(|(a, b)| a != b).count();
            assert_eq!(distance, 1);
            assert_eq!(sk.decrypt(&noisy).unwrap(), x);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let sk = worked_example_key();
        let pk = sk.public_key();
        let mut rng = rng_from_seed(1);
        assert!(pk.encrypt(&[1, 0], &mut rng, 0).is_err());
        assert!(pk.encrypt(&[1, 0, 0, 0], &mut rng, 2).is_err());
        assert!(sk.decrypt(&Ciphertext { bits: vec![0; 6] }).is_err());
        assert!(PrivateKey::from_factors(
            BitMatrix::zeros(4, 4),
            HammingCode::standard_7_4(),
            BitMatrix::identity(7)
        )
        .is_err());
        assert!(PrivateKey::from_factors(
            BitMatrix::identity(4),
            HammingCode::standard_7_4(),
            BitMatrix::zeros(7, 7)
        )
        .is_err());
    }

    #[test]
    fn keygen_recomposes_and_roundtrips() {
        let mut rng = rng_from_seed(2024);
        let mut differs_from_g = 0;
        for _ in 0..20 {
            let (pk, sk) = keygen(HammingCode::standard_7_4(), &mut rng).unwrap();
            let recomposed = sk.s().mul(sk.code().generator()).unwrap().mul(sk.p()).unwrap();
            assert_eq!(pk.g_prime(), &recomposed);
            assert_eq!(sk.s().mul(sk.s_inv()).unwrap(), BitMatrix::identity(4));
            assert_eq!(sk.p().mul(sk.p_inv()).unwrap(), BitMatrix::identity(7));
            if pk.g_prime() != sk.code().generator() {
                differs_from_g += 1;
            }
            for x in all_words(4) {
                for w in 0..=1 {
                    let ct = pk.encrypt(&x, &mut rng, w).unwrap();
                    assert_eq!(sk.decrypt(&ct).unwrap(), x);
                }
            }
        }
        assert!(differs_from_g > 15);
    }

    #[test]
    fn larger_code_roundtrip() {
        let mut rng = rng_from_seed(7);
        let (pk, sk) = keygen(HammingCode::construct(4).unwrap(), &mut rng).unwrap();
        for x in all_words(11).step_by(37) {
            let ct = pk.encrypt(&x, &mut rng, 1).unwrap();
            assert_eq!(sk.decrypt(&ct).unwrap(), x);
        }
    }
}
