//! Receiver DSP: the classical chain and the quantum chain it drives.

pub mod classical;
pub mod cma;
pub mod quantum;
pub mod vv;

use crate::qpsk::qpsk_point;
use crate::rng::{random_bits, sub_rng, Purpose};
use num_complex::Complex;

/// Length of the known classical header that opens every block.
pub const HEADER_LEN: usize = 64;
const HEADER_SEED: u64 = 0x6865_6164_6572;

/// Gray-mapped header bits (`2·HEADER_LEN`), identical for every block.
pub fn header_bits() -> Vec<u8> {
    random_bits(&mut sub_rng(HEADER_SEED, 0, Purpose::Header), 2 * HEADER_LEN)
}

/// Header symbol indices.
pub fn header_indices() -> Vec<u8> {
    header_bits()
        .chunks(2)
        .map(|b| crate::qpsk::bits_to_index(b[0], b[1]))
        .collect()
}

pub(crate) fn header_points() -> Vec<Complex<f64>> {
    header_indices().into_iter().map(|i| qpsk_point(i, 1.0)).collect()
}
