//! Transmitter DSP: RRC pulse shaping, digital frequency shifting and the
//! dual-channel waveform synthesis (classical on X, quantum on Y).

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::frequency_shift_in_place;
use crate::qpsk::qpsk_map;
use crate::scalar::Scalar;
use crate::types::{IqStream, SymbolFrame, Units};

/// Scale from a coherent-state amplitude α to the per-quadrature
/// heterodyne sample in √SNU (each heterodyne arm sees half the signal
/// against one unit of vacuum, so a quadrature is √2·Re α).
pub const HETERODYNE_SCALE: f64 = std::f64::consts::SQRT_2;

/// Root-raised-cosine pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseShape<T> {
    pub rolloff: T,
    pub span_symbols: usize,
    pub sps: usize,
    /// `span_symbols·sps + 1` taps, unit energy, symmetric.
    pub taps: Vec<T>,
}

impl<T: Scalar> PulseShape<T> {
    /// Index of the centre tap (the group delay in samples).
    pub fn delay(&self) -> usize {
        (self.taps.len() - 1) / 2
    }
}

/// RRC impulse response at time `t` (in symbol periods), unnormalised.
fn rrc_value(beta: f64, t: f64) -> f64 {
    use std::f64::consts::PI;
    if t.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    let x = 4.0 * beta * t;
    if (1.0 - x * x).abs() < 1e-9 {
        let a = PI / (4.0 * beta);
        return beta / std::f64::consts::SQRT_2 * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    ((PI * t * (1.0 - beta)).sin() + x * (PI * t * (1.0 + beta)).cos()) / (PI * t * (1.0 - x * x))
}

pub fn rrc_taps<T: Scalar>(rolloff: T, span_symbols: usize, sps: usize) -> Result<PulseShape<T>> {
    let beta = rolloff.as_f64();
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidInput(format!("RRC roll-off {beta} outside (0, 1)")));
    }
    if sps == 0 {
        return Err(Error::InvalidInput("samples per symbol must be >= 1".into()));
    }
    if span_symbols < 8 || !span_symbols.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "RRC span must be even and >= 8, got {span_symbols}"
        )));
    }
    let n = span_symbols * sps + 1;
    let centre = (n - 1) / 2;
    let raw: Vec<f64> = (0..n)
        .map(|k| rrc_value(beta, (k as f64 - centre as f64) / sps as f64))
        .collect();
    let energy: f64 = raw.iter().map(|v| v * v).sum();
    let norm = energy.sqrt();
    let mut taps: Vec<T> = raw.iter().map(|v| T::lit(v / norm)).collect();
    // Enforce exact symmetry against rounding in the time grid.
    for k in 0..centre {
        let m = taps[k];
        taps[n - 1 - k] = m;
    }
    Ok(PulseShape {
        rolloff,
        span_symbols,
        sps,
        taps,
    })
}

/// Zero-stuffs by `sps` and convolves with the taps (full convolution,
/// length `len·sps + taps − 1`). Symbol `k` peaks at sample `k·sps + delay`.
pub fn pulse_shape<T: Scalar>(frame: &SymbolFrame<T>, shape: &PulseShape<T>) -> Result<IqStream<T>> {
    let fs = frame.baud_rate_hz * T::from_usize_lossy(shape.sps);
    let expected = (fs / frame.baud_rate_hz).as_f64();
    if (expected - shape.sps as f64).abs() > 1e-9 {
        return Err(Error::InvalidInput("non-integer samples per symbol".into()));
    }
    if frame.is_empty() {
        return Err(Error::InvalidInput("empty symbol frame".into()));
    }
    let sps = shape.sps;
    let l = shape.taps.len();
    let mut out = vec![Complex::<T>::default(); frame.len() * sps + l - 1];
    for (k, &a) in frame.points.iter().enumerate() {
        if a == Complex::default() {
            continue;
        }
        let base = k * sps;
        for (o, &h) in out[base..base + l].iter_mut().zip(&shape.taps) {
            *o = *o + a * h;
        }
    }
    IqStream::new(out, fs, Units::SnuSqrt)
}

/// Per-channel transmit configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelPlan {
    pub baud_hz: f64,
    pub rolloff: f64,
    pub shift_hz: f64,
    /// RRC length in symbols.
    pub span_symbols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalPlan {
    pub channel: ChannelPlan,
    /// Symbol magnitude in √SNU at the transmitter.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuantumPlan {
    pub channel: ChannelPlan,
    /// Alice's modulation variance in SNU; coherent-state amplitude is
    /// `sqrt(v_a / 2)`.
    pub v_a: f64,
}

impl Default for ClassicalPlan {
    fn default() -> Self {
        TxPlan::reference().classical
    }
}

impl Default for QuantumPlan {
    fn default() -> Self {
        TxPlan::reference().quantum
    }
}

impl QuantumPlan {
    pub fn amplitude(&self) -> f64 {
        (self.v_a / 2.0).sqrt()
    }
}

/// Frequency plan and shaping for both channels (complex baseband relative
/// to the LO).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TxPlan {
    pub sample_rate_hz: f64,
    pub classical: ClassicalPlan,
    pub quantum: QuantumPlan,
}

impl Default for TxPlan {
    fn default() -> Self {
        Self::reference()
    }
}

impl TxPlan {
    /// 15 km metro operating point.
    pub fn reference() -> Self {
        TxPlan {
            sample_rate_hz: 20e9,
            classical: ClassicalPlan {
                channel: ChannelPlan {
                    baud_hz: 4e9,
                    rolloff: 0.1,
                    shift_hz: 4e9,
                    span_symbols: 96,
                },
                amplitude: 12.0,
            },
            quantum: QuantumPlan {
                channel: ChannelPlan {
                    baud_hz: 250e6,
                    rolloff: 0.2,
                    shift_hz: 1e9,
                    span_symbols: 32,
                },
                v_a: 0.49,
            },
        }
    }

    fn sps_of(&self, baud: f64) -> Result<usize> {
        let r = self.sample_rate_hz / baud;
        if !(r >= 1.0) || (r - r.round()).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "sample rate {} not an integer multiple of baud {}",
                self.sample_rate_hz, baud
            )));
        }
        Ok(r.round() as usize)
    }

    pub fn classical_sps(&self) -> Result<usize> {
        self.sps_of(self.classical.channel.baud_hz)
    }

    pub fn quantum_sps(&self) -> Result<usize> {
        self.sps_of(self.quantum.channel.baud_hz)
    }

    /// Quantum symbol period in classical symbols.
    pub fn sps_ratio(&self) -> Result<usize> {
        let (c, q) = (self.classical_sps()?, self.quantum_sps()?);
        if q % c != 0 {
            return Err(Error::InvalidInput(format!(
                "quantum sps {q} not a multiple of classical sps {c}"
            )));
        }
        Ok(q / c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidInput("sample_rate_hz must be positive".into()));
        }
        for (name, ch) in [
            ("classical", &self.classical.channel),
            ("quantum", &self.quantum.channel),
        ] {
            if !(ch.rolloff > 0.0 && ch.rolloff < 1.0) {
                return Err(Error::InvalidInput(format!("{name} roll-off outside (0,1)")));
            }
            if !(ch.baud_hz > 0.0) {
                return Err(Error::InvalidInput(format!("{name} baud must be positive")));
            }
            let edge = ch.shift_hz.abs() + (1.0 + ch.rolloff) * ch.baud_hz / 2.0;
            if edge >= self.sample_rate_hz / 2.0 {
                return Err(Error::Aliasing {
                    shift_hz: ch.shift_hz,
                    sample_rate_hz: self.sample_rate_hz,
                });
            }
        }
        self.sps_ratio()?;
        let c = &self.classical.channel;
        let q = &self.quantum.channel;
        let gap = (c.shift_hz - q.shift_hz).abs();
        let need = (1.0 + c.rolloff) * c.baud_hz / 2.0 + (1.0 + q.rolloff) * q.baud_hz / 2.0;
        if gap <= need {
            return Err(Error::InvalidInput(format!(
                "channel spectra overlap: spacing {gap} Hz <= {need} Hz"
            )));
        }
        if self.classical.amplitude < 0.0 || self.quantum.v_a < 0.0 {
            return Err(Error::InvalidInput("negative channel power".into()));
        }
        if [self.classical.channel.span_symbols, self.quantum.channel.span_symbols]
            .iter()
            .any(|&s| s < 8 || s % 2 != 0)
        {
            return Err(Error::InvalidInput("span_symbols must be even and >= 8".into()));
        }
        Ok(())
    }

    pub fn classical_shape<T: Scalar>(&self) -> Result<PulseShape<T>> {
        rrc_taps(
            T::lit(self.classical.channel.rolloff),
            self.classical.channel.span_symbols,
            self.classical_sps()?,
        )
    }

    pub fn quantum_shape<T: Scalar>(&self) -> Result<PulseShape<T>> {
        rrc_taps(
            T::lit(self.quantum.channel.rolloff),
            self.quantum.channel.span_symbols,
            self.quantum_sps()?,
        )
    }

    /// Sample index of the first symbol centre in synthesized waveforms.
    pub fn origin(&self) -> Result<usize> {
        let dq = self.quantum.channel.span_symbols * self.quantum_sps()? / 2;
        let dc = self.classical.channel.span_symbols * self.classical_sps()? / 2;
        Ok(dq.max(dc))
    }
}

/// Ground truth retained by the transmitter.
#[derive(Debug, Clone)]
pub struct TxTruth<T> {
    pub classical: SymbolFrame<T>,
    /// Coherent-state amplitudes α of Alice's quantum symbols.
    pub quantum: SymbolFrame<T>,
    /// Sample index of the first symbol centre (both channels).
    pub origin: usize,
}

#[derive(Debug, Clone)]
pub struct TxOutput<T> {
    /// Classical channel (X polarisation), √SNU.
    pub x_pol: IqStream<T>,
    /// Quantum channel (Y polarisation), heterodyne-referred √SNU.
    pub y_pol: IqStream<T>,
    pub truth: TxTruth<T>,
}

/// All-zero waveforms with the length [`synthesize`] would produce for
/// `n_quantum` quantum symbols; used for calibration captures with both
/// channels off.
pub fn silent<T: Scalar>(plan: &TxPlan, n_quantum: usize) -> Result<TxOutput<T>> {
    plan.validate()?;
    let fs = T::lit(plan.sample_rate_hz);
    let origin = plan.origin()?;
    let n = n_quantum * plan.quantum_sps()? + 2 * origin;
    let empty = |baud: f64| SymbolFrame {
        indices: Vec::new(),
        points: Vec::new(),
        baud_rate_hz: T::lit(baud),
        amplitude: T::zero(),
    };
    Ok(TxOutput {
        x_pol: IqStream::zeros(n, fs, Units::SnuSqrt)?,
        y_pol: IqStream::zeros(n, fs, Units::SnuSqrt)?,
        truth: TxTruth {
            classical: empty(plan.classical.channel.baud_hz),
            quantum: empty(plan.quantum.channel.baud_hz),
            origin,
        },
    })
}

/// Builds both polarisation waveforms. The classical frame carries
/// `sps_ratio` symbols per quantum symbol; both channels share the sample
/// clock and their symbol grids coincide every quantum symbol.
pub fn synthesize<T: Scalar>(plan: &TxPlan, classical_bits: &[u8], quantum_bits: &[u8]) -> Result<TxOutput<T>> {
    plan.validate()?;
    let fs = T::lit(plan.sample_rate_hz);
    let ratio = plan.sps_ratio()?;
    if classical_bits.len() != ratio * quantum_bits.len() {
        return Err(Error::Mismatch(format!(
            "classical bits {} != {} × quantum bits {}",
            classical_bits.len(),
            ratio,
            quantum_bits.len()
        )));
    }
    let c_frame = qpsk_map(
        classical_bits,
        T::lit(plan.classical.amplitude),
        T::lit(plan.classical.channel.baud_hz),
    )?;
    let q_frame = qpsk_map(
        quantum_bits,
        T::lit(plan.quantum.amplitude()),
        T::lit(plan.quantum.channel.baud_hz),
    )?;
    let c_shape = plan.classical_shape::<T>()?;
    let q_shape = plan.quantum_shape::<T>()?;
    let origin = plan.origin()?;

    let mut q_scaled = q_frame.clone();
    let scale = T::lit(HETERODYNE_SCALE);
    q_scaled.points.iter_mut().for_each(|p| *p = *p * scale);
    let q_wave = pulse_shape(&q_scaled, &q_shape)?;
    let c_wave = pulse_shape(&c_frame, &c_shape)?;

    let total = q_wave.len().max(c_wave.len());
    let place = |w: IqStream<T>, delay: usize| -> Result<IqStream<T>> {
        let mut s = vec![Complex::<T>::default(); total];
        let front = origin - delay;
        s[front..front + w.len()].copy_from_slice(&w.samples);
        IqStream::new(s, fs, Units::SnuSqrt)
    };
    let mut x_pol = place(c_wave, c_shape.delay())?;
    let mut y_pol = place(q_wave, q_shape.delay())?;
    frequency_shift_in_place(&mut x_pol, T::lit(plan.classical.channel.shift_hz))?;
    frequency_shift_in_place(&mut y_pol, T::lit(plan.quantum.channel.shift_hz))?;

    Ok(TxOutput {
        x_pol,
        y_pol,
        truth: TxTruth {
            classical: c_frame,
            quantum: q_frame,
            origin,
        },
    })
}
