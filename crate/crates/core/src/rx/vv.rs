//! Fourth-power (Viterbi & Viterbi) carrier frequency and phase estimation.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::search::{golden_max, parabolic_offset};

/// Largest zero-padded FFT used by [`vv_cfe`].
const MAX_FFT: usize = 1 << 22;

/// `−s⁴`: a QPSK point at `π/4 + kπ/2` maps onto the positive real axis.
#[inline]
pub fn fourth_power(s: Complex<f64>) -> Complex<f64> {
    let s2 = s * s;
    -(s2 * s2)
}

fn dtft_mag(z: &[Complex<f64>], nu: f64) -> f64 {
    let (sn, cs) = (-TAU * nu).sin_cos();
    let step = Complex::new(cs, sn);
    let mut rot = Complex::new(1.0, 0.0);
    let mut acc = Complex::new(0.0, 0.0);
    for (k, v) in z.iter().enumerate() {
        if k % 1024 == 0 {
            let (sn, cs) = (-TAU * nu * k as f64).sin_cos();
            rot = Complex::new(cs, sn);
        }
        acc += v * rot;
        rot *= step;
    }
    acc.norm()
}

/// Carrier frequency offset from the dominant tone of `−s⁴`, in Hz. The
/// estimate is unambiguous only for `|Δf| < baud/8`; when `reference_hz` is
/// given (a coarse data-aided estimate), disagreement beyond `baud/16` is
/// reported as [`Error::CfeAmbiguous`].
pub fn vv_cfe(symbols: &[Complex<f64>], baud_hz: f64, reference_hz: Option<f64>) -> Result<f64> {
    if symbols.len() < 16 {
        return Err(Error::InvalidInput("CFE needs at least 16 symbols".into()));
    }
    let z: Vec<Complex<f64>> = symbols.iter().map(|&s| fourth_power(s)).collect();
    let n = (4 * z.len())
        .next_power_of_two()
        .min(MAX_FFT)
        .max(z.len().next_power_of_two());
    let mut buf = z.clone();
    buf.resize(n, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mag: Vec<f64> = buf.iter().map(|b| b.norm()).collect();
    let peak = mag
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
    let k = peak.0;
    let a = mag[(k + n - 1) % n];
    let c = mag[(k + 1) % n];
    let mut bin = k as f64 + parabolic_offset(a, peak.1, c);
    if bin >= n as f64 / 2.0 {
        bin -= n as f64;
    }
    let width = 1.0 / n as f64;
    let nu0 = bin / n as f64;
    let nu = golden_max(|nu| dtft_mag(&z, nu), nu0 - width, nu0 + width, width * 1e-4);
    let f_hat = nu * baud_hz / 4.0;
    if let Some(r) = reference_hz {
        if (f_hat - r).abs() > baud_hz / 16.0 {
            return Err(Error::CfeAmbiguous(format!(
                "fourth-power estimate {f_hat:.1} Hz disagrees with reference {r:.1} Hz"
            )));
        }
    }
    Ok(f_hat)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierEstimate {
    pub f_hat_hz: f64,
    /// Unwrapped residual phase per symbol after removing `f_hat`.
    pub phase_track: Vec<f64>,
    pub vv_window: usize,
    /// Adjacent-symbol phase steps larger than π/8 after unwrapping.
    pub cycle_slips: usize,
}

/// Sliding-window fourth-power phase estimate. Returns the unwrapped phase
/// track (one entry per symbol, modulo a global `kπ/2`) and the number of
/// suspect steps.
pub fn vv_cpe(symbols: &[Complex<f64>], window: usize) -> Result<(Vec<f64>, usize)> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!("V&V window {window} must be odd and >= 3")));
    }
    if symbols.is_empty() {
        return Err(Error::InvalidInput("empty symbol sequence".into()));
    }
    let n = symbols.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(Complex::new(0.0, 0.0));
    for s in symbols {
        let last = *prefix.last().unwrap();
        prefix.push(last + fourth_power(*s));
    }
    let h = window / 2;
    let mut track = Vec::with_capacity(n);
    let mut prev = 0.0;
    for k in 0..n {
        let lo = k.saturating_sub(h);
        let hi = (k + h + 1).min(n);
        let acc = prefix[hi] - prefix[lo];
        let mut phi = acc.arg() / 4.0;
        if k > 0 {
            phi += FRAC_PI_2 * ((prev - phi) / FRAC_PI_2).round();
        }
        track.push(phi);
        prev = phi;
    }
    let slips = count_slips(&track);
    Ok((track, slips))
}

/// Steps larger than π/8 between successive estimates of an unwrapped track.
pub fn count_slips(track: &[f64]) -> usize {
    track.windows(2).filter(|w| (w[1] - w[0]).abs() > PI / 8.0).count()
}
