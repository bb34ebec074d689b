//! Experiment orchestration: block schedule with interleaved calibration,
//! per-block pipeline, metrics and summary.

pub mod config;
pub mod output;

use std::collections::BTreeMap;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate, leakage_excess, LeakageEstimate, NoiseCalibration};
use crate::channel::{propagate, BlockContext, CaptureMode, RxCapture};
use crate::error::{Error, Result};
use crate::qpsk::BerReport;
use crate::rng::{random_bits, standard_normal, sub_rng, Purpose};
use crate::rx::classical::{classical_receive, ClassicalRxReport, Timing};
use crate::rx::header_bits;
use crate::rx::quantum::{quantum_front_end, quantum_post_process, QuantumRxReport, RevealedSet};
use crate::scalar::Scalar;
use crate::security::{key_rate, SecurityParams, SecurityReport};
use crate::tx::{silent, synthesize, TxOutput};
use crate::types::IqStream;

pub use config::{load_config, ExperimentConfig};

/// One scheduled capture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledBlock {
    pub block_id: u64,
    pub mode: CaptureMode,
    pub group: usize,
    pub data_index: Option<usize>,
    pub n_quantum_symbols: usize,
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub initial_jitter_hz: f64,
}

/// Calibration groups `[DARK, SHOT, LEAK]` each followed by up to
/// `data_blocks_per_group` data blocks, on a simulated clock. The spacing
/// jitter at each block start follows a Gauss-Markov process sampled at the
/// block timestamps.
pub fn schedule(cfg: &ExperimentConfig) -> Result<Vec<ScheduledBlock>> {
    let n_q = cfg.quantum_symbols_per_block()?;
    let baud = cfg.tx.quantum.channel.baud_hz;
    let per_group = cfg.calibration.data_blocks_per_group;
    let groups = cfg.block_count.div_ceil(per_group);
    let tau = correlation_s(cfg)?;
    let rms = cfg.channel.jitter.rms_hz;
    let mut rng = sub_rng(cfg.seed, 0, Purpose::Schedule);
    let mut jitter = rms * standard_normal(&mut rng);
    let mut t = 0.0;
    let mut out = Vec::new();
    let mut data_index = 0;
    for g in 0..groups {
        let cal_n = n_q * cfg.calibration.length_factor;
        let data_here = per_group.min(cfg.block_count - data_index);
        let modes = [CaptureMode::CalDark, CaptureMode::CalShot, CaptureMode::CalLeak]
            .into_iter()
            .map(|m| (m, cal_n))
            .chain(std::iter::repeat_n((CaptureMode::Data, n_q), data_here));
        for (mode, n) in modes {
            if !out.is_empty() {
                let prev: &ScheduledBlock = out.last().unwrap();
                let rho = (-(t - prev.t_start_s) / tau).exp();
                jitter = rho * jitter + rms * (1.0 - rho * rho).sqrt() * standard_normal(&mut rng);
            }
            let dur = n as f64 / baud;
            out.push(ScheduledBlock {
                block_id: out.len() as u64,
                mode,
                group: g,
                data_index: (mode == CaptureMode::Data).then_some(data_index),
                n_quantum_symbols: n,
                t_start_s: t,
                t_end_s: t + dur,
                initial_jitter_hz: jitter,
            });
            if mode == CaptureMode::Data {
                data_index += 1;
            }
            t += dur;
        }
    }
    Ok(out)
}

fn correlation_s(cfg: &ExperimentConfig) -> Result<f64> {
    Ok(cfg.jitter_correlation_blocks * cfg.block_duration_s()?)
}

fn context(cfg: &ExperimentConfig, b: &ScheduledBlock) -> Result<BlockContext> {
    Ok(BlockContext {
        seed: cfg.seed,
        block: b.block_id,
        initial_jitter_hz: b.initial_jitter_hz,
        default_correlation_s: correlation_s(cfg)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalRecord {
    pub ber: f64,
    pub bit_errors: u64,
    pub bit_count: u64,
    pub f_hat_hz: f64,
    pub f_pilot_hz: f64,
    pub cycle_slips: usize,
    pub timing: Timing,
}

impl ClassicalRecord {
    fn from_report(r: &ClassicalRxReport) -> Self {
        ClassicalRecord {
            ber: r.ber.ber,
            bit_errors: r.ber.bit_errors,
            bit_count: r.ber.bit_count,
            f_hat_hz: r.carrier.f_hat_hz,
            f_pilot_hz: r.f_pilot_hz,
            cycle_slips: r.carrier.cycle_slips,
            timing: r.timing,
        }
    }
}

/// Values known only to the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    /// Excess noise at Bob implied by the channel settings, SNU.
    pub xi: f64,
    /// Part of `xi` from frequency wander within the block.
    pub xi_drift: f64,
    /// `√(eta·T)`.
    pub t: f64,
    pub f_res_mean_hz: f64,
    pub f_classical_hz: f64,
    pub clip_fraction_x: f64,
    pub clip_fraction_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRecord {
    pub calibration_block: Option<u64>,
    pub classical: Option<ClassicalRecord>,
    pub quantum: Option<QuantumRxReport>,
    pub truth: TruthRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub block_id: u64,
    pub mode: CaptureMode,
    pub group: usize,
    pub data_index: Option<usize>,
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub flag: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<NoiseCalibration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leakage: Option<LeakageEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataRecord>,
}

impl BlockRecord {
    fn new(b: &ScheduledBlock) -> Self {
        BlockRecord {
            block_id: b.block_id,
            mode: b.mode,
            group: b.group,
            data_index: b.data_index,
            t_start_s: b.t_start_s,
            t_end_s: b.t_end_s,
            flag: None,
            calibration: None,
            leakage: None,
            data: None,
        }
    }

    /// The finished estimate of an unflagged data block.
    pub fn estimate(&self) -> Option<(&QuantumRxReport, &TruthRecord)> {
        if self.flag.is_some() {
            return None;
        }
        let d = self.data.as_ref()?;
        Some((d.quantum.as_ref()?, &d.truth))
    }
}

fn flag_of(e: &Error) -> String {
    e.to_string()
}

/// Bits for one data block: the shared header then random payload.
pub fn block_bits(cfg: &ExperimentConfig, block_id: u64, n_q: usize) -> Result<(Vec<u8>, Vec<u8>)> {
    let ratio = cfg.tx.sps_ratio()?;
    let header = header_bits();
    let n_c_bits = 2 * ratio * n_q;
    if n_c_bits < header.len() {
        return Err(Error::InvalidInput("block shorter than the classical header".into()));
    }
    let mut c = header;
    c.extend(random_bits(
        &mut sub_rng(cfg.seed, block_id, Purpose::ClassicalBits),
        n_c_bits - c.len(),
    ));
    let q = random_bits(&mut sub_rng(cfg.seed, block_id, Purpose::QuantumBits), 2 * n_q);
    Ok((c, q))
}

/// Transmitted waveforms and channel output of one scheduled block.
pub fn simulate_block<T: Scalar>(cfg: &ExperimentConfig, b: &ScheduledBlock) -> Result<(TxOutput<T>, RxCapture<T>)> {
    let tx = match b.mode {
        CaptureMode::CalDark | CaptureMode::CalShot => silent::<T>(&cfg.tx, b.n_quantum_symbols)?,
        _ => {
            let (c, q) = block_bits(cfg, b.block_id, b.n_quantum_symbols)?;
            synthesize::<T>(&cfg.tx, &c, &q)?
        }
    };
    let cap = propagate(&tx, &cfg.tx, &cfg.channel, b.mode, &context(cfg, b)?)?;
    Ok((tx, cap))
}

/// Excess noise from frequency wander left after removing a constant phase
/// and a linear phase ramp over the block, SNU at Bob.
pub fn drift_excess(cap: &RxCapture<impl Scalar>, cfg: &ExperimentConfig) -> f64 {
    let tr = &cap.truth.quantum_offset;
    if tr.hz.len() < 3 {
        return 0.0;
    }
    let dt = tr.decimation as f64 / cfg.tx.sample_rate_hz;
    let mut acc = 0.0;
    let phase: Vec<f64> = tr
        .hz
        .iter()
        .map(|f| {
            acc += std::f64::consts::TAU * f * dt;
            acc
        })
        .collect();
    let n = phase.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = phase.iter().sum::<f64>() / n;
    let sxx: f64 = (0..phase.len()).map(|i| (i as f64 - xm).powi(2)).sum();
    let sxy: f64 = phase.iter().enumerate().map(|(i, p)| (i as f64 - xm) * (p - ym)).sum();
    let slope = sxy / sxx;
    let var = phase
        .iter()
        .enumerate()
        .map(|(i, p)| (p - ym - slope * (i as f64 - xm)).powi(2))
        .sum::<f64>()
        / n;
    cap.truth.transmittance * cap.truth.eta * cfg.tx.quantum.v_a / 2.0 * var
}

fn truth_record<T: Scalar>(cap: &RxCapture<T>, cfg: &ExperimentConfig) -> TruthRecord {
    let drift = drift_excess(cap, cfg);
    TruthRecord {
        xi: cap.truth.budget.total(cfg.quantum_rx.trusted_receiver) + drift,
        xi_drift: drift,
        t: (cap.truth.transmittance * cap.truth.eta).sqrt(),
        f_res_mean_hz: cap.truth.quantum_offset.mean_hz - cap.truth.classical_offset.mean_hz,
        f_classical_hz: cap.truth.classical_offset.mean_hz,
        clip_fraction_x: cap.truth.clip_fraction_x,
        clip_fraction_y: cap.truth.clip_fraction_y,
    }
}

/// Classical and quantum receivers on a data capture. Fills as much of the
/// record as succeeds and returns the first error.
pub fn process_data_block<T: Scalar>(
    cfg: &ExperimentConfig,
    block_id: u64,
    tx: &TxOutput<T>,
    cap: &RxCapture<T>,
    cal: Option<&NoiseCalibration>,
) -> (DataRecord, Option<Error>) {
    let mut rec = DataRecord {
        calibration_block: cal.map(|c| c.block_id),
        classical: None,
        quantum: None,
        truth: truth_record(cap, cfg),
    };
    let err = (|| -> Result<()> {
        let classical = classical_receive(
            &cap.observed.x_pol,
            &cfg.tx,
            &cfg.classical_rx,
            &tx.truth.classical.indices,
        )?;
        rec.classical = Some(ClassicalRecord::from_report(&classical));
        let cal = cal.ok_or_else(|| Error::InvalidInput("no valid noise calibration".into()))?;
        let n_q = tx.truth.quantum.len();
        let front = quantum_front_end(&cap.observed.y_pol, cal, Some(&classical), &cfg.tx, n_q)?;
        let f = cfg.quantum_rx.revealed_fraction;
        let idx = RevealedSet::choose(n_q, f, &mut sub_rng(cfg.seed, block_id, Purpose::Revealed))?;
        let mut revealed = RevealedSet::new(idx, &tx.truth.quantum.points, &front.symbols, f)?;
        let q = quantum_post_process(
            &front.symbols,
            &mut revealed,
            cfg.tx.quantum.channel.baud_hz,
            cal.v_el_snu(),
            &cfg.quantum_rx,
            block_id,
        )?;
        rec.quantum = Some(q);
        Ok(())
    })()
    .err();
    (rec, err)
}

/// Bit errors of the classical receiver alone on one freshly simulated data
/// block.
pub fn run_classical_block<T: Scalar>(cfg: &ExperimentConfig, b: &ScheduledBlock) -> Result<BerReport> {
    let (tx, cap) = simulate_block::<T>(cfg, b)?;
    let r = classical_receive(
        &cap.observed.x_pol,
        &cfg.tx,
        &cfg.classical_rx,
        &tx.truth.classical.indices,
    )?;
    Ok(r.ber)
}

struct CalGroup {
    dark: BlockRecord,
    shot: BlockRecord,
    leak: BlockRecord,
}

fn run_calibration_group<T: Scalar>(cfg: &ExperimentConfig, blocks: &[ScheduledBlock; 3]) -> CalGroup {
    let [bd, bs, bl] = blocks;
    let mut dark = BlockRecord::new(bd);
    let mut shot = BlockRecord::new(bs);
    let mut leak = BlockRecord::new(bl);
    let cal = (|| -> Result<NoiseCalibration> {
        let (_, d) = simulate_block::<T>(cfg, bd)?;
        let (_, s) = simulate_block::<T>(cfg, bs)?;
        calibrate(&d.observed, &s.observed, &cfg.tx, bs.block_id)
    })();
    match cal {
        Ok(c) => {
            dark.calibration = Some(c);
            shot.calibration = Some(c);
            let l = simulate_block::<T>(cfg, bl).and_then(|(_, cap)| leakage_excess(&cap.observed, &c, &cfg.tx));
            match l {
                Ok(est) => {
                    if est.negative {
                        leak.flag = Some("negative leakage estimate".into());
                    }
                    leak.leakage = Some(est);
                }
                Err(e) => leak.flag = Some(flag_of(&e)),
            }
        }
        Err(e) => {
            let f = flag_of(&e);
            dark.flag = Some(f.clone());
            shot.flag = Some(f.clone());
            leak.flag = Some(format!("no calibration: {f}"));
        }
    }
    CalGroup { dark, shot, leak }
}

/// Valid calibration closest in time to `b` (midpoint to midpoint); ties go
/// to the earlier one.
pub fn nearest_calibration<'a>(
    b: &ScheduledBlock,
    cals: &'a [(f64, NoiseCalibration)],
) -> Option<&'a NoiseCalibration> {
    let mid = 0.5 * (b.t_start_s + b.t_end_s);
    let mut best: Option<(f64, &NoiseCalibration)> = None;
    for (t, c) in cals {
        let d = (t - mid).abs();
        // Timestamps are sums of block durations; treat rounding-level
        // differences as ties so the earlier capture wins.
        if best.is_none_or(|(bd, _)| d < bd * (1.0 - 1e-9)) {
            best = Some((d, c));
        }
    }
    best.map(|(_, c)| c)
}

/// Run summary; [`summarize`] recomputes it from the block records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub scheduled_blocks: usize,
    pub data_blocks: usize,
    pub valid_data_blocks: usize,
    pub flagged_blocks: usize,
    pub flags: BTreeMap<String, usize>,
    pub mean_xi: Option<f64>,
    /// Mean per-block 1σ of `xi`.
    pub sigma_bar: Option<f64>,
    pub mean_xi_truth: Option<f64>,
    /// Blocks whose 3σ interval contains their own truth.
    pub ci_coverage: usize,
    pub mean_xi_uncorrected: Option<f64>,
    pub mean_f_res_hz: Option<f64>,
    pub mean_t_hat: Option<f64>,
    pub mean_v_el_snu: Option<f64>,
    pub mean_leakage_xi: Option<f64>,
    pub bit_errors: u64,
    pub bit_count: u64,
    pub ber: Option<f64>,
    pub key_rate: Option<SecurityReport>,
}

fn mean(v: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Security parameters at the estimated operating point.
pub fn estimated_security_params(cfg: &ExperimentConfig, t_hat: f64, xi: f64, v_el: f64) -> SecurityParams {
    let eta = cfg.channel.eta;
    SecurityParams {
        v_a: cfg.tx.quantum.v_a,
        t: (t_hat * t_hat / eta).min(1.0),
        xi_b: xi.max(0.0),
        eta,
        v_el: if cfg.quantum_rx.trusted_receiver { v_el } else { 0.0 },
        beta: cfg.security.beta,
        baud_hz: cfg.tx.quantum.channel.baud_hz,
    }
}

/// Security parameters the configuration implies, with `xi` at Bob.
pub fn nominal_security_params(cfg: &ExperimentConfig, xi: f64) -> SecurityParams {
    let t = (cfg.channel.transmittance() * cfg.channel.eta).sqrt();
    estimated_security_params(cfg, t, xi, cfg.channel.v_el())
}

pub fn summarize(cfg: &ExperimentConfig, records: &[BlockRecord]) -> RunSummary {
    let mut flags = BTreeMap::new();
    for r in records {
        if let Some(f) = &r.flag {
            let kind = f.split(':').next().unwrap_or(f).to_string();
            *flags.entry(kind).or_insert(0) += 1;
        }
    }
    let data: Vec<&BlockRecord> = records.iter().filter(|r| r.mode == CaptureMode::Data).collect();
    let valid: Vec<(&QuantumRxReport, &TruthRecord)> = data.iter().filter_map(|r| r.estimate()).collect();
    let ci_coverage = valid
        .iter()
        .filter(|(q, t)| (q.estimate.xi_hat_b - t.xi).abs() <= q.estimate.ci3_xi)
        .count();
    let classical: Vec<&ClassicalRecord> = data
        .iter()
        .filter(|r| r.flag.is_none())
        .filter_map(|r| r.data.as_ref()?.classical.as_ref())
        .collect();
    let bit_errors = classical.iter().map(|c| c.bit_errors).sum();
    let bit_count: u64 = classical.iter().map(|c| c.bit_count).sum();
    let mean_xi = mean(valid.iter().map(|(q, _)| q.estimate.xi_hat_b));
    let mean_t_hat = mean(valid.iter().map(|(q, _)| q.estimate.t_hat));
    let mean_v_el_snu = mean(
        records
            .iter()
            .filter(|r| r.mode == CaptureMode::CalShot && r.flag.is_none())
            .filter_map(|r| r.calibration.as_ref().map(|c| c.v_el_snu())),
    );
    let key_rate = match (mean_t_hat, mean_xi, mean_v_el_snu) {
        (Some(t), Some(xi), Some(v_el)) => {
            let p = estimated_security_params(cfg, t, xi, v_el);
            key_rate(&p, cfg.quantum_rx.revealed_fraction).ok()
        }
        _ => None,
    };
    RunSummary {
        name: cfg.name.clone(),
        seed: cfg.seed,
        scheduled_blocks: records.len(),
        data_blocks: data.len(),
        valid_data_blocks: valid.len(),
        flagged_blocks: records.iter().filter(|r| r.flag.is_some()).count(),
        flags,
        mean_xi,
        sigma_bar: mean(valid.iter().map(|(q, _)| q.estimate.ci3_xi / 3.0)),
        mean_xi_truth: mean(valid.iter().map(|(_, t)| t.xi)),
        ci_coverage,
        mean_xi_uncorrected: mean(valid.iter().map(|(q, _)| q.xi_uncorrected)),
        mean_f_res_hz: mean(valid.iter().map(|(q, _)| q.f_res_hz)),
        mean_t_hat,
        mean_v_el_snu,
        mean_leakage_xi: mean(
            records
                .iter()
                .filter(|r| r.flag.is_none())
                .filter_map(|r| r.leakage.map(|l| l.xi_leak)),
        ),
        bit_errors,
        bit_count,
        ber: (bit_count > 0).then(|| bit_errors as f64 / bit_count as f64),
        key_rate,
    }
}

/// Captures of the first data block, kept for spectra and raw dumps.
#[derive(Debug, Clone)]
pub struct FirstBlock {
    pub block_id: u64,
    pub tx: [IqStream<f64>; 2],
    pub rx: [IqStream<f64>; 2],
}

#[derive(Debug, Clone)]
pub struct MetricsLog {
    pub records: Vec<BlockRecord>,
    pub summary: RunSummary,
    pub first_block: Option<FirstBlock>,
}

fn to_f64<T: Scalar>(s: &IqStream<T>) -> IqStream<f64> {
    IqStream {
        samples: s
            .samples
            .iter()
            .map(|c| Complex::new(c.re.as_f64(), c.im.as_f64()))
            .collect(),
        sample_rate_hz: s.sample_rate_hz.as_f64(),
        units: s.units,
    }
}

/// Runs the whole schedule at `f64`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsLog> {
    run_experiment_as::<f64>(cfg)
}

/// Runs the whole schedule with samples held as `T`. Calibration groups
/// finish before any data block starts; records come back in schedule order.
pub fn run_experiment_as<T: Scalar>(cfg: &ExperimentConfig) -> Result<MetricsLog> {
    cfg.validate()?;
    let sched = schedule(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    use rayon::prelude::*;

    let cal_sets: Vec<[ScheduledBlock; 3]> = sched
        .windows(3)
        .filter(|w| w[0].mode == CaptureMode::CalDark)
        .map(|w| [w[0], w[1], w[2]])
        .collect();
    let groups: Vec<CalGroup> = pool.install(|| {
        cal_sets
            .par_iter()
            .map(|s| run_calibration_group::<T>(cfg, s))
            .collect()
    });
    let valid_cals: Vec<(f64, NoiseCalibration)> = cal_sets
        .iter()
        .zip(&groups)
        .filter(|(_, g)| g.shot.flag.is_none())
        .filter_map(|(s, g)| Some((0.5 * (s[1].t_start_s + s[1].t_end_s), g.shot.calibration?)))
        .collect();

    let data_sched: Vec<ScheduledBlock> = sched.iter().filter(|b| b.mode == CaptureMode::Data).copied().collect();
    let data: Vec<(BlockRecord, Option<FirstBlock>)> = pool.install(|| {
        data_sched
            .par_iter()
            .map(|b| {
                let mut rec = BlockRecord::new(b);
                let cal = nearest_calibration(b, &valid_cals);
                let mut first = None;
                match simulate_block::<T>(cfg, b) {
                    Ok((tx, cap)) => {
                        let (d, err) = process_data_block(cfg, b.block_id, &tx, &cap, cal);
                        rec.data = Some(d);
                        rec.flag = err.map(|e| flag_of(&e));
                        if b.data_index == Some(0) {
                            first = Some(FirstBlock {
                                block_id: b.block_id,
                                tx: [to_f64(&tx.x_pol), to_f64(&tx.y_pol)],
                                rx: [to_f64(&cap.observed.x_pol), to_f64(&cap.observed.y_pol)],
                            });
                        }
                    }
                    Err(e) => rec.flag = Some(flag_of(&e)),
                }
                (rec, first)
            })
            .collect()
    });

    let mut by_id: BTreeMap<u64, BlockRecord> = BTreeMap::new();
    for g in groups {
        for r in [g.dark, g.shot, g.leak] {
            by_id.insert(r.block_id, r);
        }
    }
    let mut first_block = None;
    for (r, f) in data {
        first_block = first_block.or(f);
        by_id.insert(r.block_id, r);
    }
    let records: Vec<BlockRecord> = by_id.into_values().collect();
    let summary = summarize(cfg, &records);
    Ok(MetricsLog {
        records,
        summary,
        first_block,
    })
}

/// Sample of the bit-error count over `n_blocks` classical-only data blocks
/// at the configured operating point.
pub fn run_classical_ber(cfg: &ExperimentConfig, n_blocks: usize) -> Result<BerReport> {
    use rayon::prelude::*;
    let n_q = cfg.quantum_symbols_per_block()?;
    let dur = cfg.block_duration_s()?;
    let mut rng = sub_rng(cfg.seed, 0, Purpose::Schedule);
    let blocks: Vec<ScheduledBlock> = (0..n_blocks)
        .map(|i| ScheduledBlock {
            block_id: i as u64,
            mode: CaptureMode::Data,
            group: 0,
            data_index: Some(i),
            n_quantum_symbols: n_q,
            t_start_s: i as f64 * dur,
            t_end_s: (i + 1) as f64 * dur,
            initial_jitter_hz: cfg.channel.jitter.rms_hz * standard_normal(&mut rng),
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let reports: Vec<Result<BerReport>> =
        pool.install(|| blocks.par_iter().map(|b| run_classical_block::<f64>(cfg, b)).collect());
    let mut total = BerReport::default();
    for r in reports {
        total = total.merge(&r?);
    }
    Ok(total)
}
