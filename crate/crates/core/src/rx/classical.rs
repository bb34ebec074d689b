//! Classical receiver: coarse frequency correction, matched filter, timing
//! search, CMA, fourth-power carrier recovery, header-based ambiguity
//! resolution and hard decisions.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::cma::{cma_equalize, CmaConfig};
use super::vv::{count_slips, vv_cfe, vv_cpe, CarrierEstimate};
use super::{header_points, HEADER_LEN};
use crate::error::{Error, Result};
use crate::filter::{fir_same, frequency_shift};
use crate::qpsk::{ber, decide, qpsk_hard_decision, BerReport};
use crate::scalar::Scalar;
use crate::tx::{PulseShape, TxPlan};
use crate::types::IqStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalRxConfig {
    pub cma: CmaConfig,
    pub vv_window: usize,
    /// Largest frame lag, in symbols, searched by header synchronisation.
    pub max_sync_lag: usize,
}

impl Default for ClassicalRxConfig {
    fn default() -> Self {
        ClassicalRxConfig {
            cma: CmaConfig::default(),
            vv_window: 65,
            max_sync_lag: 4096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timing {
    /// Downsampling phase in `[0, sps)`.
    pub best_phase_index: usize,
    /// Symbol lag of the header after downsampling.
    pub frame_lag: usize,
    /// Capture sample index of transmitted symbol 0.
    pub origin: usize,
}

#[derive(Debug, Clone)]
pub struct ClassicalRxReport {
    /// Decisions aligned to transmitted symbol 0.
    pub decided: Vec<u8>,
    /// Bit errors outside the header.
    pub ber: BerReport,
    pub carrier: CarrierEstimate,
    /// Data-aided frequency from the header.
    pub f_pilot_hz: f64,
    pub timing: Timing,
    pub taps: Vec<Complex<f64>>,
    pub sample_rate_hz: f64,
    pub sps: usize,
    /// Optical carrier phase at the symbol instants `best_phase_index + k·sps`,
    /// excluding the frequency ramp and the equalizer's own phase.
    carrier_phase: Vec<f64>,
}

impl ClassicalRxReport {
    /// Carrier phase (frequency ramp plus tracked phase) at capture sample `n`,
    /// linearly interpolated between classical symbol instants.
    pub fn carrier_phase_at(&self, n: usize) -> f64 {
        let ramp = TAU * (self.carrier.f_hat_hz / self.sample_rate_hz * n as f64).fract();
        let tau = self.timing.best_phase_index;
        let last = self.carrier_phase.len() - 1;
        let pos = if n <= tau {
            0.0
        } else {
            (n - tau) as f64 / self.sps as f64
        };
        let k = (pos.floor() as usize).min(last);
        let frac = if k == last { 0.0 } else { pos - k as f64 };
        let p = if k == last {
            self.carrier_phase[last]
        } else {
            self.carrier_phase[k] * (1.0 - frac) + self.carrier_phase[k + 1] * frac
        };
        ramp + p
    }
}

/// `frequency_shift(stream, −f_known)`.
pub fn coarse_freq_correct<T: Scalar>(capture: &IqStream<T>, f_known_hz: f64) -> Result<IqStream<T>> {
    frequency_shift(capture, T::lit(-f_known_hz))
}

/// Convolution with the (symmetric) transmit pulse, group delay removed.
pub fn matched_filter<T: Scalar>(stream: &IqStream<T>, shape: &PulseShape<T>, baud_hz: f64) -> Result<IqStream<T>> {
    let sps = stream.sample_rate_hz.as_f64() / baud_hz;
    if (sps - shape.sps as f64).abs() > 1e-9 {
        return Err(Error::Mismatch(format!(
            "stream has {sps} samples/symbol, filter expects {}",
            shape.sps
        )));
    }
    stream.ensure_nonempty()?;
    Ok(IqStream {
        samples: fir_same(&stream.samples, &shape.taps),
        sample_rate_hz: stream.sample_rate_hz,
        units: stream.units,
    })
}

/// Downsampling phase with the largest mean symbol-instant power.
pub fn timing_search(x: &[Complex<f64>], sps: usize) -> usize {
    let mut power = vec![0.0; sps];
    for (k, s) in x.iter().enumerate() {
        power[k % sps] += s.norm_sqr();
    }
    power
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc })
        .0
}

/// Differential correlation against the header. Returns the lag (in symbols)
/// and the data-aided frequency `arg(C)/2π` in cycles per symbol.
pub fn frame_sync(symbols: &[Complex<f64>], max_lag: usize) -> Result<(usize, f64)> {
    let hdr = header_points();
    if symbols.len() < HEADER_LEN + 1 {
        return Err(Error::SyncFailed("block shorter than the header".into()));
    }
    let h: Vec<Complex<f64>> = hdr.windows(2).map(|w| w[1] * w[0].conj()).collect();
    let d: Vec<Complex<f64>> = symbols.windows(2).map(|w| w[1] * w[0].conj()).collect();
    let lags = max_lag.min(d.len() - h.len()) + 1;
    let mut best = (0usize, Complex::new(0.0, 0.0));
    let mut sum_mag = 0.0;
    for l in 0..lags {
        let c: Complex<f64> = d[l..l + h.len()].iter().zip(&h).map(|(a, b)| a * b.conj()).sum();
        sum_mag += c.norm();
        if c.norm() > best.1.norm() {
            best = (l, c);
        }
    }
    let mean_other = if lags > 1 {
        (sum_mag - best.1.norm()) / (lags - 1) as f64
    } else {
        0.0
    };
    if lags > 1 && best.1.norm() < 4.0 * mean_other {
        return Err(Error::SyncFailed(format!(
            "header peak {:.3} not distinct from background {:.3}",
            best.1.norm(),
            mean_other
        )));
    }
    Ok((best.0, best.1.arg() / TAU))
}

/// Full classical chain on the classical receiver's capture. `known` holds
/// the transmitted symbol indices (header included); BER excludes the header.
pub fn classical_receive<T: Scalar>(
    capture: &IqStream<T>,
    plan: &TxPlan,
    cfg: &ClassicalRxConfig,
    known: &[u8],
) -> Result<ClassicalRxReport> {
    capture.ensure_nonempty()?;
    let fs = capture.sample_rate_hz.as_f64();
    let baud = plan.classical.channel.baud_hz;
    let shape = plan.classical_shape::<T>()?;
    let sps = shape.sps;
    if cfg.cma.input_sps != sps {
        return Err(Error::Mismatch(format!(
            "CMA input sps {} != {}",
            cfg.cma.input_sps, sps
        )));
    }
    let base = coarse_freq_correct(capture, plan.classical.channel.shift_hz)?;
    let mf = matched_filter(&base, &shape, baud)?;
    let x: Vec<Complex<f64>> = mf
        .samples
        .iter()
        .map(|s| Complex::new(s.re.as_f64(), s.im.as_f64()))
        .collect();

    let tau = timing_search(&x, sps);
    let p = x.iter().skip(tau).step_by(sps).map(|s| s.norm_sqr()).sum::<f64>() / ((x.len() - tau - 1) / sps + 1) as f64;
    if !(p > 0.0) {
        return Err(Error::InvalidInput("classical capture carries no power".into()));
    }
    let g = 1.0 / p.sqrt();
    let xn: Vec<Complex<f64>> = x.iter().map(|s| s * g).collect();
    let eq = cma_equalize(&xn, tau, &cfg.cma)?;

    let (lag, pilot_cycles) = frame_sync(&eq.symbols, cfg.max_sync_lag)?;
    let f_pilot = pilot_cycles * baud;
    let f_hat = vv_cfe(&eq.symbols[lag..], baud, Some(f_pilot))?;

    let ratio = f_hat / fs;
    let derot: Vec<Complex<f64>> = eq
        .symbols
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let n = tau + k * sps;
            s * Complex::from_polar(1.0, -TAU * (ratio * n as f64).fract())
        })
        .collect();
    let (mut track, _) = vv_cpe(&derot, cfg.vv_window)?;

    let mut corrected: Vec<Complex<f64>> = derot
        .iter()
        .zip(&track)
        .map(|(s, p)| s * Complex::from_polar(1.0, -p))
        .collect();
    let hdr = header_points();
    let head = &corrected[lag..(lag + HEADER_LEN).min(corrected.len())];
    let rot = (0..4)
        .max_by_key(|&r| {
            let j = Complex::from_polar(1.0, r as f64 * FRAC_PI_2);
            head.iter()
                .zip(&hdr)
                .filter(|(s, h)| decide(**s * j) == decide(**h))
                .count()
        })
        .unwrap();
    let jr = Complex::from_polar(1.0, rot as f64 * FRAC_PI_2);
    corrected.iter_mut().for_each(|s| *s *= jr);
    track.iter_mut().for_each(|p| *p -= rot as f64 * FRAC_PI_2);

    let carrier_phase: Vec<f64> = track.iter().zip(&eq.tap_phase).map(|(p, e)| p - e).collect();
    let decided = qpsk_hard_decision(&corrected[lag..]);
    let n = decided.len().min(known.len());
    let slips = count_slips(&track[lag..lag + n]);
    let ber_report = if n > HEADER_LEN {
        ber(&decided[HEADER_LEN..n], &known[HEADER_LEN..n])?
    } else {
        BerReport::default()
    };

    Ok(ClassicalRxReport {
        decided: decided[..n].to_vec(),
        ber: ber_report,
        carrier: CarrierEstimate {
            f_hat_hz: f_hat,
            phase_track: track,
            vv_window: cfg.vv_window,
            cycle_slips: slips,
        },
        f_pilot_hz: f_pilot,
        timing: Timing {
            best_phase_index: tau,
            frame_lag: lag,
            origin: tau + lag * sps,
        },
        taps: eq.taps,
        sample_rate_hz: fs,
        sps,
        carrier_phase,
    })
}
