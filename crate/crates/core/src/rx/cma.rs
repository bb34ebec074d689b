//! Fractionally spaced constant-modulus equalizer.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CmaConfig {
    pub num_taps: usize,
    /// Step size for unit-power input.
    pub step_size: f64,
    pub input_sps: usize,
    pub target_modulus: f64,
    pub warmup_symbols: usize,
    /// Mean |CM error| after warmup above which the equalizer is declared
    /// diverged.
    pub divergence_bound: f64,
}

impl Default for CmaConfig {
    fn default() -> Self {
        CmaConfig {
            num_taps: 21,
            step_size: 1e-3,
            input_sps: 5,
            target_modulus: 1.0,
            warmup_symbols: 10_000,
            divergence_bound: 1.0,
        }
    }
}

impl CmaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_taps == 0 || self.num_taps.is_multiple_of(2) {
            return Err(Error::InvalidInput("CMA needs an odd tap count".into()));
        }
        if !(self.step_size > 0.0 && self.step_size < 0.1) {
            return Err(Error::InvalidInput(format!(
                "CMA step {} outside (0, 0.1)",
                self.step_size
            )));
        }
        if self.input_sps == 0 || !(self.target_modulus > 0.0) {
            return Err(Error::InvalidInput("CMA needs sps >= 1 and a positive modulus".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CmaOutput {
    /// One output per symbol, for input centres `start + k·sps`.
    pub symbols: Vec<Complex<f64>>,
    pub taps: Vec<Complex<f64>>,
    /// `|y|² − R²` per symbol of the final pass.
    pub error_curve: Vec<f64>,
    /// Phase of the equalizer's DC response at each symbol; the carrier phase
    /// seen by later stages includes it.
    pub tap_phase: Vec<f64>,
}

#[inline]
fn filter_at(x: &[Complex<f64>], w: &[Complex<f64>], n: usize) -> Complex<f64> {
    let c = w.len() / 2;
    let mut y = Complex::new(0.0, 0.0);
    for (i, wi) in w.iter().enumerate() {
        let idx = n + c;
        if idx >= i && idx - i < x.len() {
            y += wi * x[idx - i];
        }
    }
    y
}

#[inline]
fn update(x: &[Complex<f64>], w: &mut [Complex<f64>], n: usize, g: Complex<f64>) {
    let c = w.len() / 2;
    for (i, wi) in w.iter_mut().enumerate() {
        let idx = n + c;
        if idx >= i && idx - i < x.len() {
            *wi -= g * x[idx - i].conj();
        }
    }
}

/// Equalizes `x` (unit mean power at the symbol instants is assumed) at
/// `input_sps`, emitting symbol-rate outputs. The warmup pass adapts over the
/// first `warmup_symbols`; the final pass restarts at the block start from the
/// warmed-up taps and keeps adapting.
pub fn cma_equalize(x: &[Complex<f64>], start: usize, cfg: &CmaConfig) -> Result<CmaOutput> {
    cfg.validate()?;
    let sps = cfg.input_sps;
    if start >= sps || x.len() < sps {
        return Err(Error::InvalidInput("CMA start must lie within the first symbol".into()));
    }
    let n_sym = (x.len() - start - 1) / sps + 1;
    let r2 = cfg.target_modulus * cfg.target_modulus;
    let mu = cfg.step_size;
    let mut w = vec![Complex::new(0.0, 0.0); cfg.num_taps];
    w[cfg.num_taps / 2] = Complex::new(1.0, 0.0);

    for k in 0..cfg.warmup_symbols.min(n_sym) {
        let n = start + k * sps;
        let y = filter_at(x, &w, n);
        let e = y * (y.norm_sqr() - r2);
        update(x, &mut w, n, e * mu);
    }
    let mut symbols = Vec::with_capacity(n_sym);
    let mut error_curve = Vec::with_capacity(n_sym);
    let mut tap_phase = Vec::with_capacity(n_sym);
    for k in 0..n_sym {
        let n = start + k * sps;
        let y = filter_at(x, &w, n);
        let err = y.norm_sqr() - r2;
        symbols.push(y);
        error_curve.push(err);
        tap_phase.push(w.iter().sum::<Complex<f64>>().arg());
        update(x, &mut w, n, y * (err * mu));
    }
    if w.iter().any(|t| !t.re.is_finite() || !t.im.is_finite()) {
        return Err(Error::CmaDiverged(f64::INFINITY));
    }
    let tail = &error_curve[cfg.warmup_symbols.min(n_sym.saturating_sub(1))..];
    if !tail.is_empty() {
        let mean_abs = tail.iter().map(|e| e.abs()).sum::<f64>() / tail.len() as f64;
        if !(mean_abs <= cfg.divergence_bound) {
            return Err(Error::CmaDiverged(mean_abs));
        }
    }
    Ok(CmaOutput {
        symbols,
        taps: w,
        error_curve,
        tap_phase,
    })
}
