//! Toy code-based cryptography over GF(2) and a neural-network cipher built
//! on the same layer structure.
//!
//! The algebraic half ([`gf2`], [`hamming`], [`mceliece`]) is exact bit
//! arithmetic. The neural half ([`nn`], [`model`], [`unistat`], [`dataio`])
//! trains a no-bias autoencoder whose hidden "ciphertext" layer is perturbed
//! with scaled uniform noise and pushed toward a uniform value distribution.
//!
//! None of this is secure. It is an experimental artifact.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataio;
pub mod error;
pub mod gf2;
pub mod hamming;
pub mod keyfile;
pub mod mceliece;
pub mod model;
pub mod nn;
pub mod unistat;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The seeded generator used for every random draw in the crate.
pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}
