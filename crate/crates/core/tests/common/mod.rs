#![allow(dead_code)]

use std::path::Path;

use jointcv::calibration::NoiseCalibration;
use jointcv::channel::{CaptureMode, ChannelParams, RxCapture};
use jointcv::runner::{load_config, simulate_block, ExperimentConfig, ScheduledBlock};
use jointcv::tx::TxOutput;

/// Bundled preset with `n_q` quantum symbols per data block.
pub fn preset(n_q: usize) -> ExperimentConfig {
    let mut cfg = load_config(Path::new("metro_15km")).unwrap();
    cfg.samples_per_block = n_q * cfg.tx.quantum_sps().unwrap();
    cfg
}

/// Preset plan over an impairment-free channel (no noise of any kind).
pub fn ideal(n_q: usize) -> ExperimentConfig {
    let mut cfg = preset(n_q);
    cfg.channel = ChannelParams::ideal();
    cfg
}

pub fn block(cfg: &ExperimentConfig, id: u64, mode: CaptureMode) -> ScheduledBlock {
    let n = cfg.quantum_symbols_per_block().unwrap();
    let d = n as f64 / cfg.tx.quantum.channel.baud_hz;
    ScheduledBlock {
        block_id: id,
        mode,
        group: 0,
        data_index: (mode == CaptureMode::Data).then_some(id as usize),
        n_quantum_symbols: n,
        t_start_s: id as f64 * d,
        t_end_s: (id + 1) as f64 * d,
        initial_jitter_hz: 0.0,
    }
}

pub fn data(cfg: &ExperimentConfig, id: u64) -> (TxOutput<f64>, RxCapture<f64>) {
    simulate_block::<f64>(cfg, &block(cfg, id, CaptureMode::Data)).unwrap()
}

/// Calibration for captures already in √SNU (unit receiver gain).
pub fn unit_calibration() -> NoiseCalibration {
    NoiseCalibration {
        v_dark: 1e-12,
        v_shot_total: 1.0 + 1e-12,
        n0: 1.0,
        block_id: 0,
        n_samples: 0,
    }
}
