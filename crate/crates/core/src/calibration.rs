//! Shot-noise and electronic-noise calibration, conversion to shot-noise
//! units, and leakage-noise measurement.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::channel::{CaptureMode, Received};
use crate::error::{Error, Result};
use crate::rx::quantum::quantum_band_symbols;
use crate::scalar::Scalar;
use crate::tx::TxPlan;
use crate::types::{IqStream, Units};

/// One shot-noise unit expressed in capture units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseCalibration {
    /// LO off: electronic noise, capture units² per quadrature.
    pub v_dark: f64,
    /// LO on, signals off: shot plus electronic noise.
    pub v_shot_total: f64,
    /// `v_shot_total − v_dark`.
    pub n0: f64,
    pub block_id: u64,
    /// Real samples behind each variance.
    pub n_samples: usize,
}

impl NoiseCalibration {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_dark > 0.0 && self.v_shot_total > self.v_dark && self.n0 > 0.0) {
            return Err(Error::InvalidCalibration {
                v_dark: self.v_dark,
                v_shot: self.v_shot_total,
            });
        }
        Ok(())
    }

    /// Electronic noise in SNU.
    pub fn v_el_snu(&self) -> f64 {
        self.v_dark / self.n0
    }
}

/// Pooled per-quadrature sample variance.
pub fn quadrature_variance(x: &[Complex<f64>]) -> f64 {
    let n = x.len() as f64;
    let mr = x.iter().map(|c| c.re).sum::<f64>() / n;
    let mi = x.iter().map(|c| c.im).sum::<f64>() / n;
    let ss: f64 = x.iter().map(|c| (c.re - mr).powi(2) + (c.im - mi).powi(2)).sum();
    ss / (2.0 * (n - 1.0))
}

/// Quantum-band front-end output (carrier removed, matched filter at the
/// quantum symbol rate) for the whole capture.
pub fn calibration_symbols<T: Scalar>(y: &IqStream<T>, plan: &TxPlan) -> Result<Vec<Complex<f64>>> {
    let sps = plan.quantum_sps()?;
    let h = plan.quantum_shape::<f64>()?.delay();
    if y.len() <= 2 * h + sps {
        return Err(Error::InvalidInput(
            "calibration capture shorter than the matched filter".into(),
        ));
    }
    let n = (y.len() - 2 * h - 1) / sps + 1;
    quantum_band_symbols(y, plan, h, n, None)
}

fn expect_mode<T>(r: &Received<T>, mode: CaptureMode) -> Result<()> {
    if r.mode != mode {
        return Err(Error::Mismatch(format!(
            "expected a {mode:?} capture, got {:?}",
            r.mode
        )));
    }
    Ok(())
}

pub fn calibrate<T: Scalar>(
    dark: &Received<T>,
    shot: &Received<T>,
    plan: &TxPlan,
    block_id: u64,
) -> Result<NoiseCalibration> {
    expect_mode(dark, CaptureMode::CalDark)?;
    expect_mode(shot, CaptureMode::CalShot)?;
    let d = calibration_symbols(&dark.y_pol, plan)?;
    let s = calibration_symbols(&shot.y_pol, plan)?;
    let v_dark = quadrature_variance(&d);
    let v_shot_total = quadrature_variance(&s);
    let cal = NoiseCalibration {
        v_dark,
        v_shot_total,
        n0: v_shot_total - v_dark,
        block_id,
        n_samples: 2 * d.len().min(s.len()),
    };
    cal.validate()?;
    Ok(cal)
}

/// Divides amplitudes by `√n0`.
pub fn to_snu<T: Scalar>(stream: &IqStream<T>, cal: &NoiseCalibration) -> Result<IqStream<T>> {
    cal.validate()?;
    let mut out = stream.clone();
    out.scale(T::lit(1.0 / cal.n0.sqrt()));
    out.units = Units::SnuSqrt;
    Ok(out)
}

pub fn to_snu_symbols(symbols: &[Complex<f64>], cal: &NoiseCalibration) -> Result<Vec<Complex<f64>>> {
    cal.validate()?;
    let g = 1.0 / cal.n0.sqrt();
    Ok(symbols.iter().map(|s| s * g).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakageEstimate {
    /// Quantum-band excess caused by the classical channel, SNU.
    pub xi_leak: f64,
    pub ci3: f64,
    /// Estimate below −3σ: inconsistent with a non-negative leakage.
    pub negative: bool,
}

/// Quantum-band variance with the classical channel on and the quantum
/// channel off, minus the shot-noise capture's variance, in SNU.
pub fn leakage_excess<T: Scalar>(leak: &Received<T>, cal: &NoiseCalibration, plan: &TxPlan) -> Result<LeakageEstimate> {
    expect_mode(leak, CaptureMode::CalLeak)?;
    cal.validate()?;
    let l = calibration_symbols(&leak.y_pol, plan)?;
    let v_leak = quadrature_variance(&l);
    let xi = (v_leak - cal.v_shot_total) / cal.n0;
    let n_l = 2.0 * l.len() as f64;
    let n_c = cal.n_samples as f64;
    let var = 2.0 * v_leak.powi(2) / (n_l - 1.0) + 2.0 * cal.v_shot_total.powi(2) / (n_c - 1.0);
    let ci3 = 3.0 * var.sqrt() / cal.n0;
    Ok(LeakageEstimate {
        xi_leak: xi,
        ci3,
        negative: xi < -ci3,
    })
}
