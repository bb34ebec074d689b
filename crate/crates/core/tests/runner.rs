mod common;

use std::path::Path;

use common::{block, preset};
use jointcv::calibration::calibrate;
use jointcv::channel::CaptureMode;
use jointcv::runner::config::load_config;
use jointcv::runner::output::{
    curve_params, emit_outputs, read_blocks, read_rows, summary_json, KeyRatePoint, SpectrumRow, BLOCKS_FILE,
    CONFIG_FILE, KEYRATE_FILE, SPECTRUM_FILE, SUMMARY_FILE, XI_FILE,
};
use jointcv::runner::{
    nearest_calibration, process_data_block, run_experiment, schedule, simulate_block, summarize, ExperimentConfig,
};
use jointcv::security::null_key_threshold;

fn small(blocks: usize) -> ExperimentConfig {
    let mut cfg = preset(6250);
    cfg.name = "small".into();
    cfg.block_count = blocks;
    cfg.calibration.length_factor = 2;
    cfg
}

fn run_into(cfg: &ExperimentConfig, dir: &Path) {
    let log = run_experiment(cfg).unwrap();
    emit_outputs(cfg, &log, dir).unwrap();
}

#[test]
fn same_seed_gives_identical_files() {
    let cfg = small(3);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_into(&cfg, a.path());
    run_into(&cfg, b.path());
    for f in [
        BLOCKS_FILE,
        SUMMARY_FILE,
        XI_FILE,
        SPECTRUM_FILE,
        KEYRATE_FILE,
        CONFIG_FILE,
    ] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(!x.is_empty(), "{f}");
        assert_eq!(x, y, "{f}");
    }
    let mut other = cfg.clone();
    other.seed += 1;
    let c = tempfile::tempdir().unwrap();
    run_into(&other, c.path());
    assert_ne!(
        std::fs::read(a.path().join(BLOCKS_FILE)).unwrap(),
        std::fs::read(c.path().join(BLOCKS_FILE)).unwrap()
    );
}

#[test]
fn worker_count_does_not_change_results() {
    let mut cfg = small(2);
    let one = run_experiment(&cfg).unwrap();
    cfg.workers = 3;
    let three = run_experiment(&cfg).unwrap();
    assert_eq!(one.records, three.records);
}

#[test]
fn outputs_are_consistent_with_records() {
    let cfg = small(3);
    let dir = tempfile::tempdir().unwrap();
    run_into(&cfg, dir.path());

    let records = read_blocks(&dir.path().join(BLOCKS_FILE)).unwrap();
    assert_eq!(records.len(), 3 + 3);
    let echoed = load_config(&dir.path().join(CONFIG_FILE)).unwrap();
    assert_eq!(echoed, cfg);
    let again = summary_json(&summarize(&echoed, &records)).unwrap() + "\n";
    assert_eq!(again, std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap());

    let mut xi = csv::Reader::from_path(dir.path().join(XI_FILE)).unwrap();
    assert_eq!(xi.headers().unwrap(), vec!["block", "xi", "ci_low", "ci_high"]);
    let rows: Vec<csv::StringRecord> = xi.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), cfg.block_count);
    let mut filled = 0;
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0].parse::<usize>().unwrap(), i);
        let flagged = records.iter().find(|b| b.data_index == Some(i)).unwrap().flag.is_some();
        if flagged {
            assert!(r[1].is_empty() && r[2].is_empty() && r[3].is_empty());
            continue;
        }
        let (x, lo, hi): (f64, f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap(), r[3].parse().unwrap());
        assert!(lo < x && x < hi);
        filled += 1;
    }
    let s0: jointcv::runner::RunSummary =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(filled, s0.valid_data_blocks);
    assert!(filled > 0);

    let s: jointcv::runner::RunSummary =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    let curve: Vec<KeyRatePoint> = read_rows(&dir.path().join(KEYRATE_FILE)).unwrap();
    let xi_null = null_key_threshold(&curve_params(&cfg, &s)).unwrap();
    let cross = curve
        .windows(2)
        .find(|w| w[0].k_sym > 0.0 && w[1].k_sym <= 0.0)
        .map(|w| w[0].xi + (w[1].xi - w[0].xi) * w[0].k_sym / (w[0].k_sym - w[1].k_sym))
        .unwrap();
    assert!((cross - xi_null).abs() < 1e-3 * xi_null, "{cross} vs {xi_null}");
}

#[test]
fn spectrum_shows_the_two_carriers() {
    let cfg = small(1);
    let dir = tempfile::tempdir().unwrap();
    run_into(&cfg, dir.path());
    let rows: Vec<SpectrumRow> = read_rows(&dir.path().join(SPECTRUM_FILE)).unwrap();
    let fs = cfg.tx.sample_rate_hz;
    let (qc, cc) = (&cfg.tx.quantum.channel, &cfg.tx.classical.channel);
    let inside = |c: &jointcv::tx::ChannelPlan, r: &SpectrumRow| {
        (r.f_norm - c.shift_hz / fs).abs() <= (1.0 + c.rolloff) * c.baud_hz / 2.0 / fs
    };
    let peak = |f: fn(&SpectrumRow) -> f64| *rows.iter().max_by(|a, b| f(a).total_cmp(&f(b))).unwrap();
    assert!(inside(qc, &peak(|r| r.tx_y)));
    assert!(inside(cc, &peak(|r| r.tx_x)));
    assert!(inside(cc, &peak(|r| r.rx_x)));

    // At the receiver the quantum band sits only slightly above shot noise,
    // so compare band averages instead of single bins.
    let mean = |sel: &dyn Fn(&SpectrumRow) -> bool| {
        let v: Vec<f64> = rows.iter().filter(|r| sel(r)).map(|r| r.rx_y).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let band = mean(&|r| inside(qc, r) && (r.f_norm - qc.shift_hz / fs).abs() < 0.5 * qc.baud_hz / fs);
    let floor = mean(&|r| !inside(qc, r) && !inside(cc, r));
    assert!(band > 1.05 * floor, "quantum band {band} vs floor {floor}");
}

#[test]
fn flagged_blocks_are_counted_not_fatal() {
    let mut cfg = small(3);
    cfg.quantum_rx.fo_search.span_hz = 20.0;
    cfg.quantum_rx.fo_search.step_hz = 10.0;
    let log = run_experiment(&cfg).unwrap();
    let flagged = log.records.iter().filter(|r| r.flag.is_some()).count();
    assert!(flagged > 0);
    assert_eq!(log.summary.flagged_blocks, flagged);
    assert_eq!(log.summary.valid_data_blocks, 3 - flagged);
    assert!(log.summary.flags.keys().any(|k| k.contains("boundary")));
    for r in log.records.iter().filter(|r| r.flag.is_some()) {
        let d = r.data.as_ref().unwrap();
        assert!(d.classical.is_some(), "classical results survive a quantum flag");
    }
}

#[test]
fn schedule_interleaves_calibration_groups() {
    let mut cfg = preset(2500);
    cfg.block_count = 12;
    let s = schedule(&cfg).unwrap();
    let modes: Vec<CaptureMode> = s.iter().map(|b| b.mode).collect();
    use CaptureMode::*;
    let group = |n: usize| [vec![CalDark, CalShot, CalLeak], vec![Data; n]].concat();
    assert_eq!(modes, [group(5), group(5), group(2)].concat());
    assert!(s.windows(2).all(|w| w[0].t_end_s == w[1].t_start_s));
    assert_eq!(
        s.iter().filter_map(|b| b.data_index).collect::<Vec<_>>(),
        (0..12).collect::<Vec<_>>()
    );
    let cal_len = s[0].t_end_s - s[0].t_start_s;
    let data_len = s[3].t_end_s - s[3].t_start_s;
    assert!((cal_len / data_len - 4.0).abs() < 1e-12);

    // Shot midpoints are 17 data lengths apart; the third data block of a
    // group is equidistant from both, later ones are closer to the next.
    let cals: Vec<(f64, jointcv::calibration::NoiseCalibration)> = s
        .iter()
        .filter(|b| b.mode == CalShot)
        .map(|b| {
            let mid = 0.5 * (b.t_start_s + b.t_end_s);
            let c = jointcv::calibration::NoiseCalibration {
                v_dark: 0.1,
                v_shot_total: 1.1,
                n0: 1.0,
                block_id: b.block_id,
                n_samples: 1,
            };
            (mid, c)
        })
        .collect();
    let shots: Vec<u64> = s.iter().filter(|b| b.mode == CalShot).map(|b| b.block_id).collect();
    for b in s.iter().filter(|b| b.mode == Data) {
        let k = b.data_index.unwrap() % 5;
        let want = if k > 2 && b.group + 1 < shots.len() {
            shots[b.group + 1]
        } else {
            shots[b.group]
        };
        assert_eq!(
            nearest_calibration(b, &cals).unwrap().block_id,
            want,
            "data {:?}",
            b.data_index
        );
    }
}

#[test]
fn receiver_gain_drift_biases_xi_predictably() {
    let mut cfg = preset(12_500);
    cfg.channel.jitter.rms_hz = 0.0;
    let dark = simulate_block::<f64>(&cfg, &block(&cfg, 0, CaptureMode::CalDark))
        .unwrap()
        .1;
    let shot = simulate_block::<f64>(&cfg, &block(&cfg, 1, CaptureMode::CalShot))
        .unwrap()
        .1;
    let cal = calibrate(&dark.observed, &shot.observed, &cfg.tx, 1).unwrap();
    let g = 1.03f64;
    let mut drifted = cfg.clone();
    drifted.channel.rx_gain *= g;
    let mut diffs = Vec::new();
    for id in 2..5 {
        let b = block(&cfg, id, CaptureMode::Data);
        let (tx, cap) = simulate_block::<f64>(&cfg, &b).unwrap();
        let base = process_data_block(&cfg, id, &tx, &cap, Some(&cal)).0.quantum.unwrap();
        let (tx, cap) = simulate_block::<f64>(&drifted, &b).unwrap();
        let moved = process_data_block(&drifted, id, &tx, &cap, Some(&cal))
            .0
            .quantum
            .unwrap();
        assert!((moved.estimate.t_hat / base.estimate.t_hat - g).abs() < 1e-3);
        let pred = (g * g - 1.0) * base.estimate.residual_variance;
        diffs.push((moved.estimate.xi_hat_b - base.estimate.xi_hat_b, pred));
    }
    for (d, pred) in diffs {
        assert!((d - pred).abs() < 1e-3 * pred.abs().max(1e-3), "{d} vs {pred}");
    }
}
