//! Sampled waveforms and symbol frames.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Amplitude unit of an [`IqStream`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Units {
    /// Raw receiver units (volts, ADC codes, ...).
    Arbitrary,
    /// Amplitudes in square-root shot-noise units: vacuum noise has variance 1
    /// per quadrature.
    SnuSqrt,
}

/// Uniformly sampled complex baseband record.
#[derive(Debug, Clone, PartialEq)]
pub struct IqStream<T> {
    pub samples: Vec<Complex<T>>,
    pub sample_rate_hz: T,
    pub units: Units,
}

impl<T: Scalar> IqStream<T> {
    pub fn new(samples: Vec<Complex<T>>, sample_rate_hz: T, units: Units) -> Result<Self> {
        if !(sample_rate_hz > T::zero()) || !sample_rate_hz.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            units,
        })
    }

    pub fn zeros(len: usize, sample_rate_hz: T, units: Units) -> Result<Self> {
        Self::new(vec![Complex::default(); len], sample_rate_hz, units)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ensure_nonempty(&self) -> Result<()> {
        if self.samples.is_empty() {
            Err(Error::InvalidInput("empty IQ stream".into()))
        } else {
            Ok(())
        }
    }

    /// Mean of |x|² over all samples.
    pub fn mean_power(&self) -> T {
        mean_power(&self.samples)
    }

    pub fn scale(&mut self, g: T) {
        for s in &mut self.samples {
            *s = *s * g;
        }
    }
}

pub fn mean_power<T: Scalar>(x: &[Complex<T>]) -> T {
    if x.is_empty() {
        return T::zero();
    }
    let acc: f64 = x.iter().map(|c| c.norm_sqr().as_f64()).sum();
    T::lit(acc / x.len() as f64)
}

/// QPSK symbol sequence.
///
/// `points[k] = amplitude · exp(j(π/4 + indices[k]·π/2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame<T> {
    pub indices: Vec<u8>,
    pub points: Vec<Complex<T>>,
    pub baud_rate_hz: T,
    pub amplitude: T,
}

impl<T: Scalar> SymbolFrame<T> {
    pub fn from_indices(indices: Vec<u8>, amplitude: T, baud_rate_hz: T) -> Result<Self> {
        if !(baud_rate_hz > T::zero()) {
            return Err(Error::InvalidInput("baud rate must be positive".into()));
        }
        if amplitude < T::zero() || !amplitude.is_finite() {
            return Err(Error::InvalidInput("amplitude must be non-negative".into()));
        }
        if let Some(bad) = indices.iter().find(|&&i| i > 3) {
            return Err(Error::InvalidInput(format!("QPSK index {bad} out of range")));
        }
        let points = indices.iter().map(|&i| crate::qpsk::qpsk_point(i, amplitude)).collect();
        Ok(Self {
            indices,
            points,
            baud_rate_hz,
            amplitude,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}
