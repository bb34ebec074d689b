use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use jointcv::runner::config::{apply_override, config_table, load_config, ExperimentConfig};
use jointcv::runner::output::{emit_outputs, write_keyrate_curve, write_sweep, SweepRow, KEYRATE_FILE, SWEEP_FILE};
use jointcv::runner::{nominal_security_params, run_experiment, MetricsLog};
use jointcv::security::{key_rate, SecurityParams};

/// Joint classical / CV-QKD coherent transmission simulator.
#[derive(Parser)]
#[command(name = "jointcv", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Override the number of data blocks.
    #[arg(long, global = true)]
    blocks: Option<usize>,
    /// Override the worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Write the first data block's waveforms as raw IQ.
    #[arg(long, global = true)]
    dump_iq: bool,
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment and write its metrics.
    Run {
        /// Config file, or the name of a bundled preset (`metro_15km`).
        config: PathBuf,
    },
    /// Repeat an experiment over values of one config key.
    Sweep {
        #[arg(default_value = "metro_15km")]
        config: PathBuf,
        /// Dotted key, e.g. `tx.classical.amplitude`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Key rate at one operating point.
    Keyrate {
        #[arg(long)]
        va: f64,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        xi: f64,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[arg(long, default_value_t = 0.0)]
        vel: f64,
        #[arg(long, default_value_t = 0.95)]
        beta: f64,
        #[arg(long, default_value_t = 250e6)]
        baud: f64,
        #[arg(long, default_value_t = 0.0)]
        revealed_fraction: f64,
    },
    /// Null-key threshold and key-rate curve at a config's nominal point.
    Threshold { config: PathBuf },
}

fn prepare(path: &Path, c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = load_config(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(d) = &c.out_dir {
        cfg.output.dir = d.clone();
    }
    if let Some(b) = c.blocks {
        cfg.block_count = b;
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    cfg.output.dump_iq |= c.dump_iq;
    cfg.validate()?;
    Ok(cfg)
}

fn report(log: &MetricsLog) {
    let s = &log.summary;
    let f = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.5}"));
    println!(
        "{}: {} data blocks ({} flagged), mean xi {} ± {} SNU (truth {}), BER {}",
        s.name,
        s.data_blocks,
        s.flagged_blocks,
        f(s.mean_xi),
        f(s.sigma_bar),
        f(s.mean_xi_truth),
        s.ber.map_or("n/a".into(), |b| format!("{b:.3e}")),
    );
    if let Some(k) = &s.key_rate {
        println!(
            "key rate {:.3} Mbit/s ({:.3} net), null-key threshold {}",
            k.k_bps / 1e6,
            k.k_bps_net / 1e6,
            f(k.xi_null)
        );
    }
}

fn run(cfg: &ExperimentConfig, quiet: bool) -> Result<MetricsLog> {
    let log = run_experiment(cfg)?;
    let files = emit_outputs(cfg, &log, &cfg.output.dir)?;
    if !quiet {
        report(&log);
        for p in files {
            println!("wrote {}", p.display());
        }
    }
    Ok(log)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let c = &cli.common;
    match &cli.cmd {
        Cmd::Run { config } => {
            run(&prepare(config, c)?, c.quiet)?;
        }
        Cmd::Sweep { config, param, values } => {
            let base = prepare(config, c)?;
            let table = config_table(&base)?;
            let mut rows = Vec::new();
            for v in values {
                let mut t = table.clone();
                apply_override(&mut t, param, v)?;
                let mut cfg = ExperimentConfig::from_table(t)?;
                cfg.output.dir = base.output.dir.join(format!("{param}={v}"));
                let log = run(&cfg, c.quiet)?;
                let s = &log.summary;
                rows.push(SweepRow {
                    param: param.clone(),
                    value: v.clone(),
                    mean_xi: s.mean_xi,
                    sigma_bar: s.sigma_bar,
                    mean_xi_truth: s.mean_xi_truth,
                    mean_leakage_xi: s.mean_leakage_xi,
                    ber: s.ber,
                    flagged_blocks: s.flagged_blocks,
                });
            }
            let path = base.output.dir.join(SWEEP_FILE);
            write_sweep(&rows, &path)?;
            if !c.quiet {
                println!("wrote {}", path.display());
            }
        }
        Cmd::Keyrate {
            va,
            t,
            xi,
            eta,
            vel,
            beta,
            baud,
            revealed_fraction,
        } => {
            let p = SecurityParams {
                v_a: *va,
                t: *t,
                xi_b: *xi,
                eta: *eta,
                v_el: *vel,
                beta: *beta,
                baud_hz: *baud,
            };
            let r = key_rate(&p, *revealed_fraction)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Cmd::Threshold { config } => {
            let cfg = prepare(config, c)?;
            let p = nominal_security_params(&cfg, 0.0);
            let r = key_rate(&p, cfg.quantum_rx.revealed_fraction)?;
            let Some(xi_null) = r.xi_null else {
                bail!("no positive key rate at zero excess noise");
            };
            std::fs::create_dir_all(&cfg.output.dir)?;
            let path = cfg.output.dir.join(KEYRATE_FILE);
            write_keyrate_curve(&p, &path)?;
            println!("xi_null = {xi_null}");
            if !c.quiet {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}
