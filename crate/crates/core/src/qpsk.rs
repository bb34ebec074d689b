//! Gray-coded QPSK mapping, hard decisions and bit-error counting.
//!
//! Bit pairs `(b0 b1)` map to constellation indices as
//! `00 → 0, 01 → 1, 11 → 2, 10 → 3`, index `i` sitting at angle
//! `π/4 + i·π/2`. Neighbouring quadrants therefore differ in one bit.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::SymbolFrame;

const GRAY_BITS: [[u8; 2]; 4] = [[0, 0], [0, 1], [1, 1], [1, 0]];

#[inline]
fn gray_word(index: u8) -> u8 {
    let b = GRAY_BITS[index as usize];
    (b[0] << 1) | b[1]
}

/// Constellation point of `index` with magnitude `amplitude`.
pub fn qpsk_point<T: Scalar>(index: u8, amplitude: T) -> Complex<T> {
    let h = amplitude * T::FRAC_1_SQRT_2();
    match index & 3 {
        0 => Complex::new(h, h),
        1 => Complex::new(-h, h),
        2 => Complex::new(-h, -h),
        _ => Complex::new(h, -h),
    }
}

pub fn bits_to_index(b0: u8, b1: u8) -> u8 {
    match (b0 & 1, b1 & 1) {
        (0, 0) => 0,
        (0, 1) => 1,
        (1, 1) => 2,
        _ => 3,
    }
}

pub fn index_to_bits(index: u8) -> [u8; 2] {
    GRAY_BITS[(index & 3) as usize]
}

/// Maps an even-length bit sequence onto a QPSK frame.
pub fn qpsk_map<T: Scalar>(bits: &[u8], amplitude: T, baud_rate_hz: T) -> Result<SymbolFrame<T>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "QPSK mapping needs an even bit count, got {}",
            bits.len()
        )));
    }
    let indices = bits.chunks_exact(2).map(|p| bits_to_index(p[0], p[1])).collect();
    SymbolFrame::from_indices(indices, amplitude, baud_rate_hz)
}

/// Quadrant decision. Points on an axis go to the lower of the two adjacent
/// indices; the origin decides 0.
pub fn decide<T: Scalar>(p: Complex<T>) -> u8 {
    let z = T::zero();
    if p.re >= z && p.im >= z {
        0
    } else if p.re < z && p.im >= z {
        1
    } else if p.re <= z && p.im < z {
        2
    } else {
        3
    }
}

pub fn qpsk_hard_decision<T: Scalar>(points: &[Complex<T>]) -> Vec<u8> {
    points.iter().map(|&p| decide(p)).collect()
}

pub fn indices_to_bits(indices: &[u8]) -> Vec<u8> {
    indices.iter().flat_map(|&i| index_to_bits(i)).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BerReport {
    pub bit_errors: u64,
    pub bit_count: u64,
    pub ber: f64,
}

impl BerReport {
    pub fn merge(&self, other: &BerReport) -> BerReport {
        let bit_errors = self.bit_errors + other.bit_errors;
        let bit_count = self.bit_count + other.bit_count;
        BerReport {
            bit_errors,
            bit_count,
            ber: if bit_count == 0 {
                0.0
            } else {
                bit_errors as f64 / bit_count as f64
            },
        }
    }
}

/// Gray-mapped bit error count between two index sequences.
pub fn ber(decided: &[u8], reference: &[u8]) -> Result<BerReport> {
    if decided.len() != reference.len() {
        return Err(Error::Mismatch(format!(
            "decided {} symbols vs reference {}",
            decided.len(),
            reference.len()
        )));
    }
    let bit_errors: u64 = decided
        .iter()
        .zip(reference)
        .map(|(&d, &r)| (gray_word(d & 3) ^ gray_word(r & 3)).count_ones() as u64)
        .sum();
    let bit_count = 2 * decided.len() as u64;
    Ok(BerReport {
        bit_errors,
        bit_count,
        ber: if bit_count == 0 {
            0.0
        } else {
            bit_errors as f64 / bit_count as f64
        },
    })
}
