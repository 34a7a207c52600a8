use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use otfs_gfra::channel::write_trace;
use otfs_gfra::harness::{self, load_experiment, run_sweep, run_trial_full, write_csv};
use otfs_gfra::modem::write_samples;
use otfs_gfra::{Error, SystemConfig};

#[derive(Parser)]
#[command(name = "otfs-gfra", version, about = "Grant-free OTFS uplink access simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo sweep over the configured SNR grid.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// One trial with the full estimate written as JSON.
    Trial {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        snr: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        json: PathBuf,
        /// Ground-truth channel parameters as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Received samples per antenna as length-prefixed binary blocks.
        #[arg(long)]
        rx_dump: Option<PathBuf>,
    },
    /// Analytic oracle checks on small configurations.
    Selftest,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERIC: u8 = 2;

fn exit_code(e: &Error) -> ExitCode {
    match e {
        Error::InvalidConfig(_) | Error::Io(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_NUMERIC),
    }
}

fn simulate(config: PathBuf, out: PathBuf) -> Result<ExitCode, Error> {
    let spec = load_experiment(&config)?;
    let points = run_sweep(&spec, spec.base.rng_seed)?;
    let mut w = BufWriter::new(File::create(&out)?);
    write_csv(&points, &mut w)?;
    w.flush()?;
    let failures: usize = points.iter().map(|p| p.failures).sum();
    let total: usize = points.iter().map(|p| p.trials).sum();
    for p in &points {
        log::info!(
            "{} dB: AER {:.4} NMSE {:.3e} oracle {:.3e}",
            p.snr_db,
            p.aer_mean,
            p.nmse_mean,
            p.nmse_oracle_mean
        );
    }
    if failures * 10 > total {
        eprintln!("{failures} of {total} trials failed");
        return Ok(ExitCode::from(EXIT_NUMERIC));
    }
    Ok(ExitCode::SUCCESS)
}

fn trial(
    config: PathBuf,
    snr: f64,
    seed: u64,
    json: PathBuf,
    trace: Option<PathBuf>,
    rx_dump: Option<PathBuf>,
) -> Result<ExitCode, Error> {
    let spec = load_experiment(&config)?;
    let cfg = SystemConfig { snr_db: snr, ..spec.base };
    let out = run_trial_full(&cfg, seed, &spec.receiver)?;
    std::fs::write(&json, out.estimate.to_json().map_err(|e| Error::InvalidConfig(e.to_string()))?)?;
    if let Some(path) = trace {
        write_trace(&out.truth, BufWriter::new(File::create(path)?))?;
    }
    if let Some(path) = rx_dump {
        let mut w = BufWriter::new(File::create(path)?);
        for antenna in &out.rx.antennas {
            write_samples(&mut w, antenna)?;
        }
        w.flush()?;
    }
    let r = &out.result;
    println!(
        "snr_db={} aer={} nmse={:.6e} nmse_oracle={:.6e} detected={} runtime_ms={:.1}",
        r.snr_db, r.aer, r.nmse, r.nmse_oracle, r.detected_count, r.runtime_ms
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out } => simulate(config, out),
        Command::Trial {
            config,
            snr,
            seed,
            json,
            trace,
            rx_dump,
        } => trial(config, snr, seed, json, trace, rx_dump),
        Command::Selftest => {
            let checks = harness::selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NUMERIC)
            })
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit_code(&e)
    })
}
