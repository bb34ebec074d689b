//! FIR filtering and mixing primitives.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::IqStream;

/// Below this many multiply-accumulates the direct form is used.
const DIRECT_LIMIT: usize = 1 << 20;

/// Full linear convolution of a complex sequence with real taps
/// (length `x.len() + taps.len() - 1`).
pub fn convolve_full<T: Scalar>(x: &[Complex<T>], taps: &[T]) -> Vec<Complex<T>> {
    if x.is_empty() || taps.is_empty() {
        return Vec::new();
    }
    if x.len().saturating_mul(taps.len()) <= DIRECT_LIMIT || taps.len() < 16 {
        convolve_direct(x, taps)
    } else {
        convolve_fft(x, taps)
    }
}

fn convolve_direct<T: Scalar>(x: &[Complex<T>], taps: &[T]) -> Vec<Complex<T>> {
    let mut y = vec![Complex::<T>::default(); x.len() + taps.len() - 1];
    for (n, &xn) in x.iter().enumerate() {
        for (k, &h) in taps.iter().enumerate() {
            y[n + k] = y[n + k] + xn * h;
        }
    }
    y
}

/// Overlap-add convolution.
fn convolve_fft<T: Scalar>(x: &[Complex<T>], taps: &[T]) -> Vec<Complex<T>> {
    let l = taps.len();
    let fft_len = (4 * l).next_power_of_two().max(4096);
    let hop = fft_len - l + 1;
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);

    let mut h_freq: Vec<Complex<T>> = vec![Complex::default(); fft_len];
    for (d, &t) in h_freq.iter_mut().zip(taps) {
        *d = Complex::new(t, T::zero());
    }
    fwd.process(&mut h_freq);
    let norm = T::one() / T::from_usize_lossy(fft_len);

    let mut y = vec![Complex::<T>::default(); x.len() + l - 1];
    let mut buf = vec![Complex::<T>::default(); fft_len];
    let mut start = 0;
    while start < x.len() {
        let end = (start + hop).min(x.len());
        buf.iter_mut().for_each(|b| *b = Complex::default());
        buf[..end - start].copy_from_slice(&x[start..end]);
        fwd.process(&mut buf);
        for (b, h) in buf.iter_mut().zip(&h_freq) {
            *b = *b * *h;
        }
        inv.process(&mut buf);
        let valid = (end - start + l - 1).min(y.len() - start);
        for (o, b) in y[start..start + valid].iter_mut().zip(&buf[..valid]) {
            *o = *o + *b * norm;
        }
        start = end;
    }
    y
}

/// Filters with symmetric taps, compensating the `(L-1)/2` group delay so
/// that `out[n] = Σ_i taps[i]·x[n + (L-1)/2 - i]`; output length equals input.
pub fn fir_same<T: Scalar>(x: &[Complex<T>], taps: &[T]) -> Vec<Complex<T>> {
    let delay = (taps.len() - 1) / 2;
    let mut full = convolve_full(x, taps);
    full.drain(..delay.min(full.len()));
    full.truncate(x.len());
    full
}

/// Evaluates the group-delay compensated filter output only at `centers`.
pub fn fir_at<T: Scalar>(x: &[Complex<T>], taps: &[T], centers: &[usize]) -> Vec<Complex<T>> {
    let delay = (taps.len() - 1) / 2;
    let n = x.len() as isize;
    centers
        .iter()
        .map(|&c| {
            let mut acc = Complex::<T>::default();
            // x index = c + delay - i
            let base = c as isize + delay as isize;
            for (i, &h) in taps.iter().enumerate() {
                let j = base - i as isize;
                if j >= 0 && j < n {
                    acc = acc + x[j as usize] * h;
                }
            }
            acc
        })
        .collect()
}

/// Phase `2π·frac(f·k/fs)` evaluated in f64 so long records stay
/// phase-accurate.
#[inline]
pub(crate) fn cycle_phase(f_over_fs: f64, k: usize) -> f64 {
    let cycles = f_over_fs * k as f64;
    std::f64::consts::TAU * (cycles - cycles.floor())
}

/// Multiplies by `exp(j·2π·shift·k/fs)`; phase-continuous from sample 0.
pub fn frequency_shift<T: Scalar>(stream: &IqStream<T>, shift_hz: T) -> Result<IqStream<T>> {
    let mut out = stream.clone();
    frequency_shift_in_place(&mut out, shift_hz)?;
    Ok(out)
}

pub fn frequency_shift_in_place<T: Scalar>(stream: &mut IqStream<T>, shift_hz: T) -> Result<()> {
    let fs = stream.sample_rate_hz.as_f64();
    let f = shift_hz.as_f64();
    if !(f.abs() < fs / 2.0) {
        return Err(Error::Aliasing {
            shift_hz: f,
            sample_rate_hz: fs,
        });
    }
    if f == 0.0 {
        return Ok(());
    }
    let ratio = f / fs;
    for (k, s) in stream.samples.iter_mut().enumerate() {
        let (sn, cs) = cycle_phase(ratio, k).sin_cos();
        *s = *s * Complex::new(T::lit(cs), T::lit(sn));
    }
    Ok(())
}

/// Multiplies each sample by `exp(j·phase[k])`.
pub fn rotate_by<T: Scalar>(samples: &mut [Complex<T>], phase: &[f64]) {
    for (s, &p) in samples.iter_mut().zip(phase) {
        let (sn, cs) = p.sin_cos();
        *s = *s * Complex::new(T::lit(cs), T::lit(sn));
    }
}
