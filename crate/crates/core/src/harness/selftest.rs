//! Analytic checks that run in a few seconds on small configurations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::{aer, nmse};
use super::oracle::true_support;
use crate::airlink::{synthesize, RxFrame};
use crate::channel::{draw_realization, ChannelRealization};
use crate::config::SystemConfig;
use crate::detector::{
    build_sensing_matrix, esprit_doppler, estimate_gains, extract_isi_free, run_pipeline, solve_on_support, somp,
    PathEstimate, PathParams, ReceiverOptions, StoppingRule,
};
use crate::error::Result;
use crate::modem::{build_frame, generate_ts, training_sequences};
use crate::numerics::{matmul, ComplexMatrix, C64};

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn small_cfg() -> SystemConfig {
    SystemConfig {
        subcarriers: 64,
        slots: 8,
        ts_len: 32,
        delay_span: 9,
        terminals: 20,
        active_terminals: 3,
        upa_x: 2,
        upa_y: 2,
        snr_db: f64::INFINITY,
        ..SystemConfig::default()
    }
}

/// Noiseless frame for `truth`, with every terminal transmitting.
pub fn noiseless_rx(truth: &ChannelRealization, cfg: &SystemConfig, rng: &mut impl Rng) -> Result<RxFrame> {
    let frames = (0..cfg.terminals)
        .map(|k| build_frame(k, cfg, rng))
        .collect::<Result<Vec<_>>>()?;
    synthesize(&frames, truth, cfg)
}

/// `|| R - Psi H || / || R ||` on the ISI-free windows, with `H` built from
/// the true gains and the path phase at the first sample of each window.
pub fn model_mismatch(truth: &ChannelRealization, rx: &RxFrame, cfg: &SystemConfig) -> Result<f64> {
    let psi = build_sensing_matrix(&training_sequences(cfg), cfg.delay_span)?;
    let meas = extract_isi_free(rx, cfg)?;
    let support = true_support(truth, cfg);
    let p_count = cfg.antennas();
    let h = ComplexMatrix::from_fn(support.len(), cfg.slots * p_count, |q, c| {
        let prof = &truth.profiles[support[q] / cfg.delay_span];
        let (i, p) = (c / p_count, c % p_count);
        let kappa = cfg.isi_free_start(i) as f64 - prof.delay as f64;
        prof.effective_gain(p) * crate::channel::doppler_phasor(prof.doppler, kappa, cfg)
    });
    let r = meas.to_matrix();
    let err = matmul(&psi.select(&support), &h)?.sub(&r)?.frobenius_norm();
    Ok(err / r.frobenius_norm())
}

fn static_identity() -> Result<Check> {
    let cfg = small_cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut truth = draw_realization(&cfg, &mut rng)?;
    truth.profiles.iter_mut().for_each(|p| p.doppler = 0.0);
    let rx = noiseless_rx(&truth, &cfg, &mut rng)?;
    let err = model_mismatch(&truth, &rx, &cfg)?;
    Ok(Check {
        name: "static channel identity",
        passed: err <= 1e-10,
        detail: format!("relative error {err:.2e}"),
    })
}

fn convolution_oracle() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let m_t = rng.random_range(4..40);
        let l = rng.random_range(1..m_t);
        let ell = rng.random_range(0..l);
        let m = 16;
        let ts = generate_ts(0, m_t, rng.random());
        let psi = build_sensing_matrix(std::slice::from_ref(&ts), l)?;
        // data block followed by the training sequence, through a unit tap at delay ell
        let mut block: Vec<C64> = (0..m).map(|_| C64::new(rng.random(), rng.random())).collect();
        block.extend_from_slice(ts.samples());
        let out: Vec<C64> = (0..block.len())
            .map(|n| if n >= ell { block[n - ell] } else { C64::new(0.0, 0.0) })
            .collect();
        for (r, v) in psi.column(ell).iter().enumerate() {
            worst = worst.max((v - out[m + l - 1 + r]).norm());
        }
    }
    Ok(Check {
        name: "convolution oracle",
        passed: worst <= 1e-12,
        detail: format!("max deviation {worst:.2e}"),
    })
}

fn somp_recovery() -> Result<Check> {
    let cfg = small_cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let psi = build_sensing_matrix(&training_sequences(&cfg), cfg.delay_span)?;
    let mut exact = 0;
    let runs = 20;
    for _ in 0..runs {
        let mut truth = draw_realization(&cfg, &mut rng)?;
        truth.profiles.iter_mut().for_each(|p| p.doppler = 0.0);
        let rx = noiseless_rx(&truth, &cfg, &mut rng)?;
        let meas = extract_isi_free(&rx, &cfg)?;
        let sol = somp(&psi, &meas, StoppingRule::FixedSparsity(cfg.active_terminals))?;
        let mut got = sol.support.clone();
        got.sort_unstable();
        if got == true_support(&truth, &cfg) {
            exact += 1;
        }
    }
    Ok(Check {
        name: "joint sparse recovery",
        passed: exact == runs,
        detail: format!("{exact}/{runs} supports exact"),
    })
}

fn esprit_exactness() -> Result<Check> {
    let mut worst = 0.0f64;
    for &p in &[1usize, 4] {
        for &v in &[-3.5, -1.0, 0.0, 0.25, 1.5, 3.9] {
            let n = 8;
            let gains: Vec<C64> = (0..p).map(|a| C64::from_polar(1.0 + a as f64, 0.7 * a as f64)).collect();
            let ups = ComplexMatrix::from_fn(n, p, |i, a| {
                gains[a] * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * v * i as f64 / n as f64)
            });
            worst = worst.max((esprit_doppler(&ups)? - v).abs());
        }
    }
    Ok(Check {
        name: "subspace Doppler",
        passed: worst <= 1e-6,
        detail: format!("max error {worst:.2e}"),
    })
}

fn gain_inversion() -> Result<Check> {
    let cfg = SystemConfig {
        active_terminals: 2,
        ..small_cfg()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let truth = draw_realization(&cfg, &mut rng)?;
    let rx = noiseless_rx(&truth, &cfg, &mut rng)?;
    let psi = build_sensing_matrix(&training_sequences(&cfg), cfg.delay_span)?;
    let meas = extract_isi_free(&rx, &cfg)?;
    let support = true_support(&truth, &cfg);
    let sol = solve_on_support(&psi, &meas, support.clone())?;
    let paths: Vec<PathParams> = support
        .iter()
        .map(|&index| {
            let prof = &truth.profiles[index / cfg.delay_span];
            PathParams {
                index,
                delay: prof.delay,
                doppler: prof.doppler,
            }
        })
        .collect();
    let gains = estimate_gains(&sol, &paths, &psi, &cfg)?;
    let mut worst = 0.0f64;
    for (q, &index) in support.iter().enumerate() {
        let prof = &truth.profiles[index / cfg.delay_span];
        for p in 0..cfg.antennas() {
            worst = worst.max((gains[(q, p)] - prof.effective_gain(p)).norm());
        }
    }
    Ok(Check {
        name: "effective gain inversion",
        passed: worst <= 1e-6,
        detail: format!("max error {worst:.2e}"),
    })
}

fn metric_examples() -> Result<Check> {
    let cfg = SystemConfig {
        active_terminals: 1,
        ..small_cfg()
    };
    let truth = draw_realization(&cfg, &mut ChaCha8Rng::seed_from_u64(15))?;
    let delta = 0.1;
    let mut est = crate::detector::ChannelEstimate::empty(cfg.terminals);
    for prof in truth.active_profiles() {
        est.terminals[prof.id].alpha_hat = 1;
        est.terminals[prof.id].paths.push(PathEstimate {
            delay: prof.delay,
            doppler: prof.doppler,
            gains: (0..cfg.antennas()).map(|p| prof.effective_gain(p) * (1.0 + delta)).collect(),
        });
    }
    let n = nmse(&est, &truth, &cfg)?;
    let a = aer(&[1, 1, 0], &[1, 0, 1])?;
    let passed = (n - delta * delta).abs() < 1e-12 && (a - 2.0 / 3.0).abs() < 1e-15;
    Ok(Check {
        name: "metric closed forms",
        passed,
        detail: format!("scaled-gain NMSE {n:.6}, AER {a:.6}"),
    })
}

fn noiseless_pipeline() -> Result<Check> {
    let cfg = small_cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let truth = draw_realization(&cfg, &mut rng)?;
    let rx = noiseless_rx(&truth, &cfg, &mut rng)?;
    let est = run_pipeline(&rx, &training_sequences(&cfg), &cfg, &ReceiverOptions::default())?;
    let a = aer(&est.alpha_hat(), &truth.activity())?;
    let n = nmse(&est, &truth, &cfg)?;
    Ok(Check {
        name: "noiseless receiver",
        passed: a == 0.0 && n <= 1e-6,
        detail: format!("AER {a}, NMSE {n:.2e}"),
    })
}

/// Runs every check; a check that errors counts as failed.
pub fn selftest() -> Vec<Check> {
    type Case = (&'static str, fn() -> Result<Check>);
    let cases: [Case; 7] = [
        ("static channel identity", static_identity),
        ("convolution oracle", convolution_oracle),
        ("joint sparse recovery", somp_recovery),
        ("subspace Doppler", esprit_exactness),
        ("effective gain inversion", gain_inversion),
        ("metric closed forms", metric_examples),
        ("noiseless receiver", noiseless_pipeline),
    ];
    cases
        .iter()
        .map(|(name, f)| {
            f().unwrap_or_else(|e| Check {
                name,
                passed: false,
                detail: format!("error: {e}"),
            })
        })
        .collect()
}
