//! Physical impairments between Alice and Bob.
//!
//! Order inside [`propagate`]: delay → loss → common laser phase noise →
//! carrier offset (plus the differential spacing drift on the quantum
//! channel) → classical leakage into the quantum band → excess noise →
//! detection noise → receiver gain → quantization.

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{convolve_full, cycle_phase, frequency_shift, rotate_by};
use crate::rng::{standard_normal, sub_rng, Purpose, SimRng};
use crate::scalar::Scalar;
use crate::tx::{TxOutput, TxPlan};
use crate::types::{IqStream, Units};

/// Slow fluctuation of the classical/quantum spacing: first-order
/// Gauss-Markov process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterModel {
    pub rms_hz: f64,
    /// Correlation time; `None` means one block duration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation_s: Option<f64>,
}

impl JitterModel {
    pub fn none() -> Self {
        JitterModel {
            rms_hz: 0.0,
            correlation_s: None,
        }
    }
}

/// Optional settings are written as a number or the string `"off"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    pub length_km: f64,
    pub loss_db_per_km: f64,
    /// Detector efficiency in (0, 1].
    pub eta: f64,
    pub linewidth_tx_hz: f64,
    pub linewidth_lo_hz: f64,
    /// Laser/LO detuning, common to both channels.
    pub f_offset_hz: f64,
    /// Deterministic part of the quantum channel's extra offset caused by
    /// the drifting channel spacing.
    pub spacing_offset_hz: f64,
    pub jitter: JitterModel,
    /// Flat coupling of the classical field into the quantum band, dB.
    /// `None` disables leakage.
    #[serde(with = "off_or_number")]
    pub leakage_db: Option<f64>,
    /// Additional excess noise at Bob's detector, SNU per quadrature.
    pub excess_noise_snu: f64,
    pub shot_noise: bool,
    /// Shot-to-electronic noise clearance of the quantum receiver.
    #[serde(with = "off_or_number")]
    pub clearance_db: Option<f64>,
    #[serde(with = "off_or_number")]
    pub classical_clearance_db: Option<f64>,
    /// Effective number of bits of the digitizer; `None` disables it.
    #[serde(with = "off_or_number")]
    pub enob: Option<f64>,
    /// Quantizer full scale of the quantum receiver in √SNU.
    pub full_scale_snu: f64,
    pub classical_full_scale_snu: f64,
    /// Receiver gain from √SNU to capture units.
    pub rx_gain: f64,
    pub delay_samples: usize,
    pub random_carrier_phase: bool,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::reference()
    }
}

mod off_or_number {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Word(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) => Repr::Number(*x),
            None => Repr::Word("off".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(x) => Ok(Some(x)),
            Repr::Word(w) if w == "off" => Ok(None),
            Repr::Word(w) => Err(serde::de::Error::custom(format!(
                "expected a number or \"off\", got \"{w}\""
            ))),
        }
    }
}

impl ChannelParams {
    /// 15 km link with the noise budget used by the bundled preset.
    pub fn reference() -> Self {
        ChannelParams {
            length_km: 15.0,
            loss_db_per_km: 0.2,
            eta: 1.0,
            linewidth_tx_hz: 100.0,
            linewidth_lo_hz: 100.0,
            f_offset_hz: 20e6,
            spacing_offset_hz: 455.0,
            jitter: JitterModel {
                rms_hz: 500.0,
                correlation_s: None,
            },
            leakage_db: Some(-42.56),
            excess_noise_snu: 0.007,
            shot_noise: true,
            clearance_db: Some(13.0),
            classical_clearance_db: Some(3.0),
            enob: Some(6.0),
            full_scale_snu: 5.1,
            classical_full_scale_snu: 15.0,
            rx_gain: 0.01,
            delay_samples: 37,
            random_carrier_phase: true,
        }
    }

    /// Everything off: lossless, noiseless, unquantized.
    pub fn ideal() -> Self {
        ChannelParams {
            length_km: 0.0,
            loss_db_per_km: 0.2,
            eta: 1.0,
            linewidth_tx_hz: 0.0,
            linewidth_lo_hz: 0.0,
            f_offset_hz: 0.0,
            spacing_offset_hz: 0.0,
            jitter: JitterModel::none(),
            leakage_db: None,
            excess_noise_snu: 0.0,
            shot_noise: false,
            clearance_db: None,
            classical_clearance_db: None,
            enob: None,
            full_scale_snu: 5.1,
            classical_full_scale_snu: 15.0,
            rx_gain: 1.0,
            delay_samples: 0,
            random_carrier_phase: false,
        }
    }

    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.length_km * self.loss_db_per_km / 10.0)
    }

    pub fn combined_linewidth_hz(&self) -> f64 {
        self.linewidth_tx_hz + self.linewidth_lo_hz
    }

    pub fn v_el(&self) -> f64 {
        self.clearance_db.map_or(0.0, |c| 10f64.powf(-c / 10.0))
    }

    pub fn leakage_coefficient(&self) -> f64 {
        self.leakage_db.map_or(0.0, |d| 10f64.powf(d / 20.0))
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.transmittance();
        if !(t > 0.0 && t <= 1.0) || self.length_km < 0.0 {
            return Err(Error::InvalidInput(format!("transmittance {t} outside (0,1]")));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidInput(format!("eta {} outside (0,1]", self.eta)));
        }
        for (name, c) in [
            ("clearance_db", self.clearance_db),
            ("classical_clearance_db", self.classical_clearance_db),
        ] {
            if let Some(c) = c {
                if !(c > 0.0) {
                    return Err(Error::InvalidInput(format!("{name} must be positive")));
                }
            }
        }
        if self.linewidth_tx_hz < 0.0 || self.linewidth_lo_hz < 0.0 {
            return Err(Error::InvalidInput("negative linewidth".into()));
        }
        if self.jitter.rms_hz < 0.0 || self.excess_noise_snu < 0.0 {
            return Err(Error::InvalidInput("negative jitter or excess noise".into()));
        }
        if let Some(e) = self.enob {
            if !(e > 1.0) {
                return Err(Error::InvalidInput("enob must exceed 1".into()));
            }
        }
        if !(self.full_scale_snu > 0.0 && self.classical_full_scale_snu > 0.0 && self.rx_gain > 0.0) {
            return Err(Error::InvalidInput("full scales and gain must be positive".into()));
        }
        Ok(())
    }
}

/// What the receiver is doing during a capture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CaptureMode {
    /// Both channels on.
    Data,
    /// LO on, both signals off.
    CalShot,
    /// LO off: electronic noise only.
    CalDark,
    /// Quantum off, classical on.
    CalLeak,
}

impl CaptureMode {
    pub fn lo_on(self) -> bool {
        self != CaptureMode::CalDark
    }

    pub fn quantum_on(self) -> bool {
        self == CaptureMode::Data
    }

    pub fn classical_on(self) -> bool {
        matches!(self, CaptureMode::Data | CaptureMode::CalLeak)
    }
}

/// The observable part of a capture: what the receiver DSP may read.
#[derive(Debug, Clone)]
pub struct Received<T> {
    /// Classical receiver (X polarisation).
    pub x_pol: IqStream<T>,
    /// Dedicated low-noise quantum receiver (Y polarisation).
    pub y_pol: IqStream<T>,
    pub mode: CaptureMode,
}

/// Excess-noise contributions injected by the channel, SNU per quadrature
/// at Bob.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ExcessBudget {
    pub leakage: f64,
    pub residual: f64,
    pub linewidth: f64,
    pub quantization: f64,
    pub electronic: f64,
}

impl ExcessBudget {
    /// Excess noise an estimator should report. With a trusted receiver the
    /// calibrated dark noise (electronic plus quantization) is subtracted.
    pub fn total(&self, trusted_receiver: bool) -> f64 {
        let base = self.leakage + self.residual + self.linewidth;
        if trusted_receiver {
            base
        } else {
            base + self.electronic + self.quantization
        }
    }
}

/// Sampled frequency trajectory of an offset process.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTrace {
    pub decimation: usize,
    pub hz: Vec<f64>,
    pub mean_hz: f64,
}

/// Hidden record for tests; never reachable from receiver DSP, which only
/// receives [`Received`].
#[derive(Debug, Clone)]
pub struct RxTruth {
    pub mode: CaptureMode,
    pub transmittance: f64,
    pub eta: f64,
    /// Sample index of the first symbol centre in the capture.
    pub origin: usize,
    pub budget: ExcessBudget,
    pub classical_offset: FrequencyTrace,
    pub quantum_offset: FrequencyTrace,
    /// Common laser phase (rad) every `phase_decimation` samples.
    pub phase: Vec<f64>,
    pub phase_decimation: usize,
    pub clip_fraction_x: f64,
    pub clip_fraction_y: f64,
}

#[derive(Debug, Clone)]
pub struct RxCapture<T> {
    pub observed: Received<T>,
    pub truth: RxTruth,
}

pub fn apply_loss<T: Scalar>(stream: &IqStream<T>, transmittance: f64) -> Result<IqStream<T>> {
    if !(transmittance > 0.0 && transmittance <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "transmittance {transmittance} outside (0,1]"
        )));
    }
    let mut out = stream.clone();
    out.scale(T::lit(transmittance.sqrt()));
    Ok(out)
}

/// Wiener phase with per-sample increment variance `2π·linewidth/fs`,
/// starting at `start`.
pub fn wiener_phase<R: Rng + ?Sized>(
    len: usize,
    linewidth_hz: f64,
    sample_rate_hz: f64,
    start: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    if linewidth_hz == 0.0 {
        out.resize(len, start);
        return out;
    }
    let sigma = (std::f64::consts::TAU * linewidth_hz / sample_rate_hz).sqrt();
    let mut theta = start;
    for _ in 0..len {
        out.push(theta);
        theta += sigma * standard_normal(rng);
    }
    out
}

/// Multiplies by `exp(jθ_k)` with θ a Wiener process.
pub fn apply_phase_noise<T: Scalar, R: Rng + ?Sized>(
    stream: &IqStream<T>,
    linewidth_hz: f64,
    rng: &mut R,
) -> Result<IqStream<T>> {
    if linewidth_hz < 0.0 {
        return Err(Error::InvalidInput("negative linewidth".into()));
    }
    let mut out = stream.clone();
    if linewidth_hz > 0.0 {
        let theta = wiener_phase(out.len(), linewidth_hz, stream.sample_rate_hz.as_f64(), 0.0, rng);
        rotate_by(&mut out.samples, &theta);
    }
    Ok(out)
}

/// Applies `exp(j·2π∫f)` with `f = f_offset + jitter`, the jitter a
/// Gauss-Markov process starting at `initial_jitter_hz` with correlation
/// time `correlation_s`.
pub fn apply_frequency_offset<T: Scalar, R: Rng + ?Sized>(
    stream: &IqStream<T>,
    f_offset_hz: f64,
    jitter_rms_hz: f64,
    correlation_s: f64,
    initial_jitter_hz: f64,
    rng: &mut R,
) -> Result<(IqStream<T>, FrequencyTrace)> {
    let fs = stream.sample_rate_hz.as_f64();
    let excursion = f_offset_hz.abs() + initial_jitter_hz.abs() + 6.0 * jitter_rms_hz;
    if !(excursion < fs / 2.0) {
        return Err(Error::Aliasing {
            shift_hz: excursion,
            sample_rate_hz: fs,
        });
    }
    let decimation = 64;
    let mut out = stream.clone();
    let n = out.len();
    let mut trace = Vec::with_capacity(n / decimation + 1);
    let ratio = f_offset_hz / fs;
    let dynamic = jitter_rms_hz > 0.0 || initial_jitter_hz != 0.0;
    let rho = if correlation_s > 0.0 {
        (-1.0 / (fs * correlation_s)).exp()
    } else {
        0.0
    };
    let drive = jitter_rms_hz * (1.0 - rho * rho).sqrt();
    let mut fj = initial_jitter_hz;
    let mut jitter_phase = 0.0f64;
    let mut sum_f = 0.0;
    for (k, s) in out.samples.iter_mut().enumerate() {
        if k % decimation == 0 {
            trace.push(f_offset_hz + fj);
        }
        sum_f += fj;
        let phase = cycle_phase(ratio, k) + jitter_phase;
        if phase != 0.0 {
            let (sn, cs) = phase.sin_cos();
            *s = *s * Complex::new(T::lit(cs), T::lit(sn));
        }
        if dynamic {
            jitter_phase += std::f64::consts::TAU * fj / fs;
            if jitter_rms_hz > 0.0 {
                fj = rho * fj + drive * standard_normal(rng);
            }
        }
    }
    let mean_hz = f_offset_hz + if n > 0 { sum_f / n as f64 } else { 0.0 };
    Ok((
        out,
        FrequencyTrace {
            decimation,
            hz: trace,
            mean_hz,
        },
    ))
}

/// `quantum + 10^(leakage_db/20)·classical`.
pub fn apply_leakage<T: Scalar>(
    quantum: &IqStream<T>,
    classical: &IqStream<T>,
    leakage_db: Option<f64>,
) -> Result<IqStream<T>> {
    if quantum.len() != classical.len() || quantum.sample_rate_hz != classical.sample_rate_hz {
        return Err(Error::Mismatch("leakage streams differ in length or rate".into()));
    }
    let mut out = quantum.clone();
    if let Some(db) = leakage_db {
        let c = T::lit(10f64.powf(db / 20.0));
        for (o, x) in out.samples.iter_mut().zip(&classical.samples) {
            *o = *o + *x * c;
        }
    }
    Ok(out)
}

fn add_gaussian<T: Scalar, R: Rng + ?Sized>(samples: &mut [Complex<T>], var_per_quadrature: f64, rng: &mut R) {
    if var_per_quadrature <= 0.0 {
        return;
    }
    let sd = var_per_quadrature.sqrt();
    for s in samples.iter_mut() {
        let re = sd * standard_normal(rng);
        let im = sd * standard_normal(rng);
        *s = *s + Complex::new(T::lit(re), T::lit(im));
    }
}

/// Coherent front-end noise: scales by `√eta`, adds vacuum noise (variance
/// 1 SNU per quadrature) when `shot` is set, and always adds electronic
/// noise of variance `10^(-clearance/10)`.
pub fn add_detection_noise<T: Scalar, R: Rng + ?Sized>(
    stream: &IqStream<T>,
    clearance_db: Option<f64>,
    eta: f64,
    shot: bool,
    rng: &mut R,
) -> Result<IqStream<T>> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidInput(format!("eta {eta} outside (0,1]")));
    }
    let mut out = stream.clone();
    if eta != 1.0 {
        out.scale(T::lit(eta.sqrt()));
    }
    let v_el = clearance_db.map_or(0.0, |c| 10f64.powf(-c / 10.0));
    let var = v_el + if shot { 1.0 } else { 0.0 };
    add_gaussian(&mut out.samples, var, rng);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizeReport {
    pub levels: u64,
    pub step: f64,
    /// Fraction of real components beyond ±full scale.
    pub clip_fraction: f64,
}

/// Uniform mid-rise quantizer with `2^round(enob)` levels per quadrature over
/// `[-full_scale, full_scale]`; out-of-range values stick to the outer level.
pub fn quantize<T: Scalar>(stream: &IqStream<T>, enob: f64, full_scale: f64) -> Result<(IqStream<T>, QuantizeReport)> {
    if !(full_scale > 0.0) || !(enob > 1.0) {
        return Err(Error::InvalidInput(
            "quantizer needs full_scale > 0 and enob > 1".into(),
        ));
    }
    let levels = 2u64.pow(enob.round() as u32);
    let step = 2.0 * full_scale / levels as f64;
    let top = full_scale - step / 2.0;
    let mut clipped = 0usize;
    let mut q = |x: f64| -> f64 {
        if x.abs() > full_scale {
            clipped += 1;
        }
        ((x / step).floor() * step + step / 2.0).clamp(-top, top)
    };
    let mut out = stream.clone();
    for s in out.samples.iter_mut() {
        let re = q(s.re.as_f64());
        let im = q(s.im.as_f64());
        *s = Complex::new(T::lit(re), T::lit(im));
    }
    let clip_fraction = if out.is_empty() {
        0.0
    } else {
        clipped as f64 / (2 * out.len()) as f64
    };
    Ok((
        out,
        QuantizeReport {
            levels,
            step,
            clip_fraction,
        },
    ))
}

/// Per-block context threaded in by the scheduler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockContext {
    pub seed: u64,
    pub block: u64,
    /// Spacing jitter at the start of the block.
    pub initial_jitter_hz: f64,
    /// Correlation time used when the model leaves it unset.
    pub default_correlation_s: f64,
}

/// Power gain of the leaked classical field into the quantum matched-filter
/// output per unit classical symbol energy, for the aligned symbol grids.
pub fn leakage_gain(plan: &TxPlan) -> Result<f64> {
    let hc = plan.classical_shape::<f64>()?;
    let hq = plan.quantum_shape::<f64>()?;
    let hc_c: Vec<Complex<f64>> = hc.taps.iter().map(|&t| Complex::new(t, 0.0)).collect();
    let g = convolve_full(&hc_c, &hq.taps);
    let centre = hc.delay() + hq.delay();
    let sps = hc.sps;
    let mut acc = g[centre].norm_sqr();
    let mut k = sps;
    while k <= centre || centre + k < g.len() {
        if centre + k < g.len() {
            acc += g[centre + k].norm_sqr();
        }
        if k <= centre {
            acc += g[centre - k].norm_sqr();
        }
        k += sps;
    }
    Ok(acc)
}

/// Excess-noise bookkeeping implied by `params` at this plan.
pub fn excess_budget(plan: &TxPlan, params: &ChannelParams) -> Result<ExcessBudget> {
    let t = params.transmittance();
    let eta = params.eta;
    let c2 = params.leakage_coefficient().powi(2);
    let es_c = plan.classical.amplitude.powi(2);
    let leakage = c2 * t * eta * es_c * leakage_gain(plan)? / 2.0;
    let ts_q = 1.0 / plan.quantum.channel.baud_hz;
    let diffusion = std::f64::consts::TAU * params.combined_linewidth_hz() * ts_q / 6.0;
    let linewidth = t * eta * plan.quantum.v_a / 2.0 * diffusion;
    let quantization = params.enob.map_or(0.0, |e| {
        let step = 2.0 * params.full_scale_snu / 2f64.powf(e.round());
        step * step / 12.0
    });
    Ok(ExcessBudget {
        leakage,
        residual: params.excess_noise_snu,
        linewidth,
        quantization,
        electronic: params.v_el(),
    })
}

fn delayed<T: Scalar>(s: &IqStream<T>, d: usize) -> IqStream<T> {
    let mut samples = vec![Complex::<T>::default(); d];
    samples.extend_from_slice(&s.samples);
    IqStream {
        samples,
        sample_rate_hz: s.sample_rate_hz,
        units: s.units,
    }
}

fn rng_for(ctx: &BlockContext, p: Purpose) -> SimRng {
    sub_rng(ctx.seed, ctx.block, p)
}

/// Runs the transmitted waveforms through the channel and both receivers.
pub fn propagate<T: Scalar>(
    tx: &TxOutput<T>,
    plan: &TxPlan,
    params: &ChannelParams,
    mode: CaptureMode,
    ctx: &BlockContext,
) -> Result<RxCapture<T>> {
    params.validate()?;
    let fs = plan.sample_rate_hz;
    let t = params.transmittance();
    let d = params.delay_samples;

    let silent = |s: &IqStream<T>| IqStream {
        samples: vec![Complex::<T>::default(); s.len()],
        sample_rate_hz: s.sample_rate_hz,
        units: s.units,
    };
    let x0 = if mode.classical_on() {
        tx.x_pol.clone()
    } else {
        silent(&tx.x_pol)
    };
    let y0 = if mode.quantum_on() {
        tx.y_pol.clone()
    } else {
        silent(&tx.y_pol)
    };
    let mut x = apply_loss(&delayed(&x0, d), t)?;
    let mut y = apply_loss(&delayed(&y0, d), t)?;
    let n = x.len();

    // Common laser phase (transmitter and LO lasers are shared by both channels).
    let mut phase_rng = rng_for(ctx, Purpose::PhaseNoise);
    let start = if params.random_carrier_phase {
        phase_rng.random::<f64>() * std::f64::consts::TAU
    } else {
        0.0
    };
    let theta = wiener_phase(n, params.combined_linewidth_hz(), fs, start, &mut phase_rng);
    if params.combined_linewidth_hz() > 0.0 || start != 0.0 {
        rotate_by(&mut x.samples, &theta);
        rotate_by(&mut y.samples, &theta);
    }

    let corr = params.jitter.correlation_s.unwrap_or(ctx.default_correlation_s);
    let mut jrng = rng_for(ctx, Purpose::Jitter);
    let (x, classical_offset) = apply_frequency_offset(&x, params.f_offset_hz, 0.0, corr, 0.0, &mut jrng)?;
    let (y, quantum_offset) = apply_frequency_offset(
        &y,
        params.f_offset_hz + params.spacing_offset_hz,
        params.jitter.rms_hz,
        corr,
        ctx.initial_jitter_hz,
        &mut jrng,
    )?;

    // Classical field recentred on the quantum carrier: the coupled part
    // that overlaps the quantum band.
    let mut y = if params.leakage_db.is_some() && mode.classical_on() {
        let offset = plan.quantum.channel.shift_hz - plan.classical.channel.shift_hz;
        let leak = frequency_shift(&x, T::lit(offset))?;
        apply_leakage(&y, &leak, params.leakage_db)?
    } else {
        y
    };

    if mode.quantum_on() && params.excess_noise_snu > 0.0 {
        let mut r = rng_for(ctx, Purpose::ExcessNoise);
        add_gaussian(&mut y.samples, params.excess_noise_snu / params.eta, &mut r);
    }

    let shot = mode.lo_on() && params.shot_noise;
    let (x_sig, y_sig) = if mode.lo_on() { (x, y) } else { (silent(&x), silent(&y)) };
    let mut xr = rng_for(ctx, Purpose::ClassicalDetection);
    let mut yr = rng_for(ctx, Purpose::QuantumDetection);
    let mut x = add_detection_noise(&x_sig, params.classical_clearance_db, params.eta, shot, &mut xr)?;
    let mut y = add_detection_noise(&y_sig, params.clearance_db, params.eta, shot, &mut yr)?;

    let g = params.rx_gain;
    x.scale(T::lit(g));
    y.scale(T::lit(g));
    x.units = Units::Arbitrary;
    y.units = Units::Arbitrary;
    let (mut clip_x, mut clip_y) = (0.0, 0.0);
    if let Some(enob) = params.enob {
        let (qx, rx) = quantize(&x, enob, params.classical_full_scale_snu * g)?;
        let (qy, ry) = quantize(&y, enob, params.full_scale_snu * g)?;
        x = qx;
        y = qy;
        clip_x = rx.clip_fraction;
        clip_y = ry.clip_fraction;
    }

    let phase_decimation = 16;
    Ok(RxCapture {
        observed: Received {
            x_pol: x,
            y_pol: y,
            mode,
        },
        truth: RxTruth {
            mode,
            transmittance: t,
            eta: params.eta,
            origin: tx.truth.origin + d,
            budget: excess_budget(plan, params)?,
            classical_offset,
            quantum_offset,
            phase: theta.iter().step_by(phase_decimation).copied().collect(),
            phase_decimation,
            clip_fraction_x: clip_x,
            clip_fraction_y: clip_y,
        },
    })
}

impl<T: Scalar> Received<T> {
    /// Adds one Wiener phase realization to both polarisations, emulating a
    /// broader-linewidth laser pair on stored data.
    pub fn with_common_phase_noise<R: Rng + ?Sized>(&self, linewidth_hz: f64, rng: &mut R) -> Received<T> {
        let fs = self.x_pol.sample_rate_hz.as_f64();
        let theta = wiener_phase(self.x_pol.len(), linewidth_hz, fs, 0.0, rng);
        let mut out = self.clone();
        rotate_by(&mut out.x_pol.samples, &theta);
        rotate_by(&mut out.y_pol.samples, &theta);
        out
    }
}
