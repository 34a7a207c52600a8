use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{aer, nmse};
use super::oracle::oracle_ls;
use crate::airlink::{propagate, RxFrame};
use crate::channel::{draw_realization, ChannelRealization};
use crate::config::SystemConfig;
use crate::detector::{run_pipeline, ChannelEstimate, ReceiverOptions};
use crate::error::{Error, Result};
use crate::modem::{build_frame, training_sequences};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialResult {
    pub snr_db: f64,
    pub aer: f64,
    pub nmse: f64,
    pub nmse_oracle: f64,
    pub detected_count: usize,
    pub runtime_ms: f64,
}

/// Everything produced by one trial, for dumps and inspection.
#[derive(Clone, Debug)]
pub struct TrialOutput {
    pub result: TrialResult,
    pub truth: ChannelRealization,
    pub rx: RxFrame,
    pub estimate: ChannelEstimate,
    pub oracle: ChannelEstimate,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at grid point `snr_index`.
pub fn trial_seed(base: u64, snr_index: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(base) ^ snr_index as u64) ^ trial as u64)
}

/// One realization through the pipeline and the oracle on the same frame.
pub fn run_trial_full(cfg: &SystemConfig, seed: u64, opts: &ReceiverOptions) -> Result<TrialOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = draw_realization(cfg, &mut rng)?;
    let frames = (0..cfg.terminals)
        .map(|k| build_frame(k, cfg, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let rx = propagate(&frames, &truth, cfg, &mut rng)?;
    let ts_list = training_sequences(cfg);

    let estimate = run_pipeline(&rx, &ts_list, cfg, opts)?;
    let oracle = oracle_ls(&rx, &truth, &ts_list, cfg, opts)?;

    let alpha = truth.activity();
    let result = TrialResult {
        snr_db: cfg.snr_db,
        aer: aer(&estimate.alpha_hat(), &alpha)?,
        nmse: nmse(&estimate, &truth, cfg)?,
        nmse_oracle: nmse(&oracle, &truth, cfg)?,
        detected_count: estimate.detected().len(),
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    Ok(TrialOutput {
        result,
        truth,
        rx,
        estimate,
        oracle,
    })
}

pub fn run_trial(cfg: &SystemConfig, seed: u64, opts: &ReceiverOptions) -> Result<TrialResult> {
    run_trial_full(cfg, seed, opts).map(|out| out.result)
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub base: SystemConfig,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub receiver: ReceiverOptions,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.snr_db.is_empty() {
            return Err(Error::InvalidConfig("SNR grid is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.snr_db.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidConfig("SNR grid contains NaN".into()));
        }
        Ok(())
    }
}

/// Aggregated statistics at one SNR.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub aer_mean: f64,
    pub aer_ci: f64,
    pub nmse_mean: f64,
    pub nmse_ci: f64,
    pub nmse_oracle_mean: f64,
    pub nmse_oracle_ci: f64,
    pub failures: usize,
    pub trials: usize,
}

/// Mean and 95% normal-approximation half-width.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

fn aggregate(snr_db: f64, results: &[Result<TrialResult>]) -> SweepPoint {
    let ok: Vec<&TrialResult> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let column = |f: fn(&TrialResult) -> f64| mean_ci(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
    let (aer_mean, aer_ci) = column(|r| r.aer);
    let (nmse_mean, nmse_ci) = column(|r| r.nmse);
    let (nmse_oracle_mean, nmse_oracle_ci) = column(|r| r.nmse_oracle);
    SweepPoint {
        snr_db,
        aer_mean,
        aer_ci,
        nmse_mean,
        nmse_ci,
        nmse_oracle_mean,
        nmse_oracle_ci,
        failures: results.len() - ok.len(),
        trials: results.len(),
    }
}

/// Runs every trial of the grid in parallel and aggregates in index order.
pub fn run_sweep(spec: &SweepSpec, base_seed: u64) -> Result<Vec<SweepPoint>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.snr_db.len())
        .flat_map(|s| (0..spec.trials).map(move |t| (s, t)))
        .collect();
    let results: Vec<Result<TrialResult>> = jobs
        .par_iter()
        .map(|&(s, t)| {
            let cfg = SystemConfig {
                snr_db: spec.snr_db[s],
                ..spec.base.clone()
            };
            let r = run_trial(&cfg, trial_seed(base_seed, s, t), &spec.receiver);
            if let Err(e) = &r {
                log::warn!("trial {t} at {} dB failed: {e}", spec.snr_db[s]);
            }
            r
        })
        .collect();
    Ok(results
        .chunks(spec.trials)
        .zip(&spec.snr_db)
        .map(|(chunk, &snr)| aggregate(snr, chunk))
        .collect())
}

pub const CSV_HEADER: &str = "snr_db,aer_mean,aer_ci,nmse_mean,nmse_ci,nmse_oracle_mean,nmse_oracle_ci,failures,trials";

/// Decimal with 9 significant digits, trailing zeros trimmed.
pub fn format_sig9(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.8e}", x.abs());
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let point = exp + 1;
    let mut s = if point <= 0 {
        format!("0.{}{digits}", "0".repeat((-point) as usize))
    } else if point as usize >= digits.len() {
        format!("{digits}{}", "0".repeat(point as usize - digits.len()))
    } else {
        let (int, frac) = digits.split_at(point as usize);
        format!("{int}.{frac}")
    };
    if s.contains('.') {
        s = s.trim_end_matches('0').trim_end_matches('.').to_string();
    }
    if x < 0.0 {
        s.insert(0, '-');
    }
    s
}

pub fn write_csv(points: &[SweepPoint], mut out: impl Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            format_sig9(p.snr_db),
            format_sig9(p.aer_mean),
            format_sig9(p.aer_ci),
            format_sig9(p.nmse_mean),
            format_sig9(p.nmse_ci),
            format_sig9(p.nmse_oracle_mean),
            format_sig9(p.nmse_oracle_ci),
            p.failures,
            p.trials
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(20.0), "20");
        assert_eq!(format_sig9(-5.0), "-5");
        assert_eq!(format_sig9(0.1), "0.1");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(2.0 / 3.0 * 1e-7), "0.0000000666666667");
        assert_eq!(format_sig9(123456789012.0), "123456789000");
        assert_eq!(format_sig9(9.9999999999), "10");
        assert_eq!(format_sig9(f64::NAN), "NaN");
    }

    #[test]
    fn mean_ci_matches_hand_computation() {
        let (m, ci) = mean_ci(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        let s = (5.0f64 / 3.0).sqrt();
        assert!((ci - 1.96 * s / 2.0).abs() < 1e-15);
        assert!(mean_ci(&[1.0]).1.is_nan());
        assert!(mean_ci(&[]).0.is_nan());
    }

    #[test]
    fn seeds_are_distinct_across_grid() {
        let mut seen = std::collections::HashSet::new();
        for s in 0..7 {
            for t in 0..200 {
                assert!(seen.insert(trial_seed(42, s, t)));
            }
        }
        assert_ne!(trial_seed(1, 0, 0), trial_seed(2, 0, 0));
    }

    #[test]
    fn aggregation_counts_failures() {
        let ok = |aer| {
            Ok(TrialResult {
                snr_db: 10.0,
                aer,
                nmse: 0.1,
                nmse_oracle: 0.05,
                detected_count: 1,
                runtime_ms: 1.0,
            })
        };
        let results = vec![ok(0.0), Err(Error::NoActiveTerminals), ok(0.5)];
        let p = aggregate(10.0, &results);
        assert_eq!(p.failures, 1);
        assert_eq!(p.trials, 3);
        assert_eq!(p.aer_mean, 0.25);
        assert_eq!(p.nmse_mean, 0.1);
    }

    #[test]
    fn invalid_specs_rejected() {
        let base = SweepSpec {
            base: SystemConfig::default(),
            snr_db: vec![0.0],
            trials: 1,
            receiver: ReceiverOptions::default(),
        };
        assert!(base.validate().is_ok());
        assert!(SweepSpec { snr_db: vec![], ..base.clone() }.validate().is_err());
        assert!(SweepSpec { trials: 0, ..base }.validate().is_err());
    }
}
