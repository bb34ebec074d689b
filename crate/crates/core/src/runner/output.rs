//! Metrics files and plot series.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{
    estimated_security_params, nominal_security_params, BlockRecord, ExperimentConfig, MetricsLog, RunSummary,
};
use crate::channel::CaptureMode;
use crate::error::{Error, Result};
use crate::iqdump::write_iq;
use crate::security::{key_rate, null_key_threshold, SecurityParams};

pub const BLOCKS_FILE: &str = "blocks.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const XI_FILE: &str = "xi_blocks.csv";
pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const KEYRATE_FILE: &str = "keyrate_curve.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const CONFIG_FILE: &str = "effective_config.toml";

const WELCH_NFFT: usize = 4096;
const CURVE_POINTS: usize = 101;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| io_err(path, e)
}

/// Writes the effective configuration; the first file of every run.
pub fn write_effective_config(cfg: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(CONFIG_FILE);
    std::fs::write(&path, cfg.to_toml_string()?).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

pub fn write_blocks(records: &[BlockRecord], path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| io_err(path, e))?;
        writeln!(w, "{line}").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_blocks(path: &Path) -> Result<Vec<BlockRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| io_err(path, e)))
        .collect()
}

pub fn summary_json(s: &RunSummary) -> Result<String> {
    serde_json::to_string_pretty(s).map_err(|e| Error::Io(e.to_string()))
}

/// One row per data block; flagged blocks leave the estimate columns empty.
pub fn write_xi_csv(records: &[BlockRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["block", "xi", "ci_low", "ci_high"])
        .map_err(csv_err(path))?;
    for r in records.iter().filter(|r| r.mode == CaptureMode::Data) {
        let block = r.data_index.unwrap_or_default().to_string();
        match r.estimate() {
            Some((q, _)) => {
                let e = &q.estimate;
                w.write_record([
                    block,
                    e.xi_hat_b.to_string(),
                    (e.xi_hat_b - e.ci3_xi).to_string(),
                    (e.xi_hat_b + e.ci3_xi).to_string(),
                ])
            }
            None => w.write_record([block.as_str(), "", "", ""]),
        }
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Welch periodogram (Hann window, half overlap), two-sided, ordered from
/// `-fs/2` to `fs/2`. Power per Hz in squared stream units.
pub fn welch_psd(x: &[Complex<f64>], fs: f64, nfft: usize) -> Vec<(f64, f64)> {
    if x.len() < nfft || nfft < 2 {
        return Vec::new();
    }
    let win: Vec<f64> = (0..nfft)
        .map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / nfft as f64).cos())
        .collect();
    let u: f64 = win.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(nfft);
    let mut acc = vec![0.0; nfft];
    let mut segments = 0;
    let mut buf = vec![Complex::new(0.0, 0.0); nfft];
    let mut start = 0;
    while start + nfft <= x.len() {
        for (b, (s, w)) in buf.iter_mut().zip(x[start..start + nfft].iter().zip(&win)) {
            *b = s * w;
        }
        fft.process(&mut buf);
        acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += b.norm_sqr());
        segments += 1;
        start += nfft / 2;
    }
    let scale = 1.0 / (fs * u * segments as f64);
    (0..nfft)
        .map(|i| {
            let k = (i + nfft / 2) % nfft;
            let f = (i as f64 - (nfft / 2) as f64) * fs / nfft as f64;
            (f, acc[k] * scale)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub freq_hz: f64,
    pub f_norm: f64,
    pub tx_x: f64,
    pub tx_y: f64,
    pub rx_x: f64,
    pub rx_y: f64,
}

pub fn spectrum_rows(log: &MetricsLog) -> Vec<SpectrumRow> {
    let Some(fb) = &log.first_block else {
        return Vec::new();
    };
    let fs = fb.tx[0].sample_rate_hz;
    let psd = |s: &crate::types::IqStream<f64>| welch_psd(&s.samples, fs, WELCH_NFFT);
    let (tx, ty, rx, ry) = (psd(&fb.tx[0]), psd(&fb.tx[1]), psd(&fb.rx[0]), psd(&fb.rx[1]));
    (0..tx.len())
        .map(|i| SpectrumRow {
            freq_hz: tx[i].0,
            f_norm: tx[i].0 / fs,
            tx_x: tx[i].1,
            tx_y: ty[i].1,
            rx_x: rx[i].1,
            rx_y: ry[i].1,
        })
        .collect()
}

fn write_rows<S: Serialize>(rows: &[S], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_rows<S: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<S>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRatePoint {
    pub xi: f64,
    pub k_sym: f64,
    pub k_bps: f64,
}

/// Signed key rate against excess noise from 0 to 1.5× the null-key
/// threshold (or 0.1 SNU when there is none).
pub fn keyrate_curve(p: &SecurityParams) -> Result<Vec<KeyRatePoint>> {
    let top = null_key_threshold(p).map(|x| 1.5 * x).unwrap_or(0.1);
    (0..CURVE_POINTS)
        .map(|i| {
            let xi = top * i as f64 / (CURVE_POINTS - 1) as f64;
            let r = key_rate(&p.with_xi(xi), 0.0)?;
            Ok(KeyRatePoint {
                xi,
                k_sym: r.k_sym_raw,
                k_bps: r.k_sym_raw * p.baud_hz,
            })
        })
        .collect()
}

pub fn write_keyrate_curve(p: &SecurityParams, path: &Path) -> Result<()> {
    write_rows(&keyrate_curve(p)?, path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub mean_xi: Option<f64>,
    pub sigma_bar: Option<f64>,
    pub mean_xi_truth: Option<f64>,
    pub mean_leakage_xi: Option<f64>,
    pub ber: Option<f64>,
    pub flagged_blocks: usize,
}

pub fn write_sweep(rows: &[SweepRow], path: &Path) -> Result<()> {
    write_rows(rows, path)
}

/// Security parameters for the key-rate curve of a finished run: the
/// estimated operating point when one exists, else the configured one.
pub fn curve_params(cfg: &ExperimentConfig, s: &RunSummary) -> SecurityParams {
    match (s.mean_t_hat, s.mean_v_el_snu) {
        (Some(t), Some(v)) => estimated_security_params(cfg, t, 0.0, v),
        _ => nominal_security_params(cfg, 0.0),
    }
}

/// Writes every output of a run into `dir`.
pub fn emit_outputs(cfg: &ExperimentConfig, log: &MetricsLog, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = vec![write_effective_config(cfg, dir)?];
    let p = dir.join(BLOCKS_FILE);
    write_blocks(&log.records, &p)?;
    out.push(p);
    let p = dir.join(SUMMARY_FILE);
    std::fs::write(&p, summary_json(&log.summary)? + "\n").map_err(|e| io_err(&p, e))?;
    out.push(p);
    let p = dir.join(XI_FILE);
    write_xi_csv(&log.records, &p)?;
    out.push(p);
    let rows = spectrum_rows(log);
    if !rows.is_empty() {
        let p = dir.join(SPECTRUM_FILE);
        write_rows(&rows, &p)?;
        out.push(p);
    }
    let p = dir.join(KEYRATE_FILE);
    write_keyrate_curve(&curve_params(cfg, &log.summary), &p)?;
    out.push(p);
    if cfg.output.dump_iq {
        if let Some(fb) = &log.first_block {
            for (name, s) in [
                ("tx_x", &fb.tx[0]),
                ("tx_y", &fb.tx[1]),
                ("rx_x", &fb.rx[0]),
                ("rx_y", &fb.rx[1]),
            ] {
                let p = dir.join(format!("block{}_{name}.iq", fb.block_id));
                write_iq(&p, s)?;
                out.push(p);
            }
        }
    }
    Ok(out)
}
