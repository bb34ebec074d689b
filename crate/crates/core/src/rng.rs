//! Deterministic randomness.
//!
//! Every stochastic operation draws from a [`SimRng`] (ChaCha20, 20 rounds,
//! `rand_chacha` reference output). Independent sub-streams are derived from a
//! single 64-bit seed by selecting the ChaCha stream id
//! `(block << 8) | purpose`, so blocks and impairments never share a stream
//! and any block can be regenerated in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub type SimRng = ChaCha20Rng;

/// Role of a random stream inside one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    ClassicalBits = 1,
    QuantumBits = 2,
    PhaseNoise = 3,
    Jitter = 4,
    QuantumDetection = 5,
    ClassicalDetection = 6,
    ExcessNoise = 7,
    Revealed = 8,
    PostHocPhase = 9,
    Schedule = 10,
    Header = 11,
    Test = 255,
}

/// Sub-seeded generator for `(seed, block, purpose)`.
pub fn sub_rng(seed: u64, block: u64, purpose: Purpose) -> SimRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((block << 8) | purpose as u64);
    rng
}

#[inline]
pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniformly random bits.
pub fn random_bits<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random::<bool>() as u8).collect()
}
