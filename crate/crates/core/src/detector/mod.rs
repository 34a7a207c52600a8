//! Two-stage receiver: joint-sparse recovery over the ISI-free training
//! windows for activity detection and coarse CIR, then a parametric stage
//! (subspace Doppler estimation and effective-gain least squares) that
//! rebuilds the time-varying CIR over the whole frame.

mod activity;
mod esprit;
mod estimate;
mod gains;
mod prune;
mod sensing;
mod somp;

pub use activity::{detect_activity, effective_cir_matrix, extract_delays, support_group, terminal_of};
pub use esprit::esprit_doppler;
pub use estimate::{reconstruct_cir, ChannelEstimate, PathEstimate, TerminalEstimate};
pub use gains::{coupling_matrix, decouple, estimate_gains, window_phases, PathParams};
pub use prune::{best_unexplained_atom, path_significance, prune_paths, Significance, DEFAULT_PRUNE_Z};
pub use sensing::{build_sensing_matrix, extract_isi_free, SensingMatrix, StackedMeasurement};
pub use somp::{somp, RecoverySolution, StoppingRule, DEFAULT_EPSILON};

use crate::airlink::RxFrame;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::modem::TrainingSequence;
use crate::numerics::{least_squares_solve, ComplexMatrix};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReceiverOptions {
    pub stop: StoppingRule,
    /// Extra Doppler passes on coefficients with inter-path coupling removed.
    pub refinement_passes: usize,
    /// Margin, in standard deviations of the noise-only statistic, for
    /// keeping a recovered path under the full frame model. `None` keeps
    /// every path returned by the pursuit.
    pub prune_z: Option<f64>,
}

impl Default for ReceiverOptions {
    fn default() -> Self {
        Self {
            stop: StoppingRule::default(),
            refinement_passes: DEFAULT_REFINEMENT_PASSES,
            prune_z: Some(DEFAULT_PRUNE_Z),
        }
    }
}

pub const DEFAULT_REFINEMENT_PASSES: usize = 2;

/// Full receiver on one frame.
pub fn run_pipeline(
    rx: &RxFrame,
    ts_list: &[TrainingSequence],
    cfg: &SystemConfig,
    opts: &ReceiverOptions,
) -> Result<ChannelEstimate> {
    let (psi, meas) = prepare(rx, ts_list, cfg)?;
    let sol = somp(&psi, &meas, opts.stop)?;
    parametric_stage(&psi, &meas, sol, cfg, opts)
}

/// Runs the parametric stage on a given support instead of the recovered one.
/// The support is taken as is; no path is pruned.
pub fn run_on_support(
    rx: &RxFrame,
    ts_list: &[TrainingSequence],
    support: &[usize],
    cfg: &SystemConfig,
    opts: &ReceiverOptions,
) -> Result<ChannelEstimate> {
    let (psi, meas) = prepare(rx, ts_list, cfg)?;
    let sol = solve_on_support(&psi, &meas, support.to_vec())?;
    let opts = ReceiverOptions { prune_z: None, ..*opts };
    parametric_stage(&psi, &meas, sol, cfg, &opts)
}

/// Dictionary and stacked observations for a frame.
pub fn prepare(
    rx: &RxFrame,
    ts_list: &[TrainingSequence],
    cfg: &SystemConfig,
) -> Result<(SensingMatrix, StackedMeasurement)> {
    cfg.validate()?;
    if ts_list.len() != cfg.terminals {
        return Err(Error::dims(format!("{} training sequences", cfg.terminals), ts_list.len()));
    }
    let meas = extract_isi_free(rx, cfg)?;
    let psi = build_sensing_matrix(ts_list, cfg.delay_span)?;
    Ok((psi, meas))
}

/// Least-squares coefficients on a fixed support.
pub fn solve_on_support(psi: &SensingMatrix, meas: &StackedMeasurement, support: Vec<usize>) -> Result<RecoverySolution> {
    let y = meas.to_matrix();
    let coeffs = if support.is_empty() {
        ComplexMatrix::zeros(0, meas.columns.len())
    } else {
        least_squares_solve(&psi.select(&support), &y)?
    };
    let residual_norm = if support.is_empty() {
        y.frobenius_norm()
    } else {
        crate::numerics::matmul(&psi.select(&support), &coeffs)?.sub(&y)?.frobenius_norm()
    };
    Ok(RecoverySolution {
        support,
        coeffs,
        residual_norm,
        residual_history: vec![residual_norm],
    })
}

fn doppler_of_row(rows: &ComplexMatrix, row: usize, cfg: &SystemConfig) -> Result<f64> {
    let p = cfg.antennas();
    let coeffs = rows.row(row);
    let upsilon = ComplexMatrix::from_fn(cfg.slots, p, |i, a| coeffs[i * p + a]);
    esprit_doppler(&upsilon)
}

/// Doppler of every support index, refined on decoupled coefficients.
///
/// Paths whose Doppler cannot be estimated are dropped and the coefficients
/// are re-solved on the remaining support.
fn estimate_paths(
    psi: &SensingMatrix,
    meas: &StackedMeasurement,
    mut sol: RecoverySolution,
    cfg: &SystemConfig,
    opts: &ReceiverOptions,
) -> Result<(RecoverySolution, Vec<PathParams>)> {
    let l = cfg.delay_span;
    let dopplers = loop {
        let mut kept = Vec::with_capacity(sol.support.len());
        let mut dopplers = Vec::with_capacity(sol.support.len());
        for &idx in &sol.support {
            let upsilon = effective_cir_matrix(&sol, idx, cfg.slots, cfg.antennas())?;
            match esprit_doppler(&upsilon) {
                Ok(v) => {
                    kept.push(idx);
                    dopplers.push(v);
                }
                Err(e) => log::debug!("dropping path {idx}: {e}"),
            }
        }
        if kept.len() == sol.support.len() {
            break dopplers;
        }
        sol = solve_on_support(psi, meas, kept)?;
    };

    let mut paths: Vec<PathParams> = sol
        .support
        .iter()
        .zip(&dopplers)
        .map(|(&index, &doppler)| PathParams {
            index,
            delay: index % l,
            doppler,
        })
        .collect();

    for _ in 0..opts.refinement_passes {
        if paths.len() < 2 {
            break;
        }
        let separated = decouple(&sol, &paths, psi, cfg)?;
        for (q, path) in paths.iter_mut().enumerate() {
            if let Ok(v) = doppler_of_row(&separated, q, cfg) {
                path.doppler = v;
            }
        }
    }
    Ok((sol, paths))
}

/// Prunes paths that explain only noise under the frame model, then adds
/// back atoms that the frame-model residual singles out, one at a time,
/// for as long as each addition is significant.
fn select_paths(
    psi: &SensingMatrix,
    meas: &StackedMeasurement,
    sol: RecoverySolution,
    cfg: &SystemConfig,
    opts: &ReceiverOptions,
) -> Result<(RecoverySolution, Vec<PathParams>)> {
    let (mut sol, mut paths) = estimate_paths(psi, meas, sol, cfg, opts)?;
    let Some(z) = opts.prune_z else {
        return Ok((sol, paths));
    };
    let cap = psi.rows().saturating_sub(1).min(psi.cols());
    loop {
        let kept = prune_paths(psi, meas, &paths, cfg, z)?;
        if kept.len() < paths.len() {
            let support = kept.iter().map(|&q| paths[q].index).collect();
            (sol, paths) = estimate_paths(psi, meas, solve_on_support(psi, meas, support)?, cfg, opts)?;
        }
        if paths.len() >= cap {
            break;
        }
        let sig = path_significance(psi, meas, &paths, cfg)?;
        let Some(j) = best_unexplained_atom(psi, &sig.residual, &sol.support) else {
            break;
        };
        let mut support = sol.support.clone();
        support.push(j);
        let (grown_sol, grown) = estimate_paths(psi, meas, solve_on_support(psi, meas, support)?, cfg, opts)?;
        let Some(pos) = grown.iter().position(|p| p.index == j) else {
            break;
        };
        let sig = path_significance(psi, meas, &grown, cfg)?;
        if sig.delta[pos] <= sig.floor(cfg.antennas(), z) {
            break;
        }
        log::debug!("adding support index {j} ({:.3e})", sig.delta[pos]);
        (sol, paths) = (grown_sol, grown);
    }
    Ok((sol, paths))
}

/// Doppler, gain and CIR reconstruction for every support index of `sol`.
pub fn parametric_stage(
    psi: &SensingMatrix,
    meas: &StackedMeasurement,
    sol: RecoverySolution,
    cfg: &SystemConfig,
    opts: &ReceiverOptions,
) -> Result<ChannelEstimate> {
    let l = cfg.delay_span;
    let (sol, paths) = select_paths(psi, meas, sol, cfg, opts)?;

    let gains = estimate_gains(&sol, &paths, psi, cfg)?;

    let (alpha, detected) = detect_activity(&sol, cfg.terminals, l);
    let mut estimate = ChannelEstimate::empty(cfg.terminals);
    for k in detected {
        let delays = extract_delays(&sol, k, l)?;
        let group = support_group(&sol, k, l);
        let term = &mut estimate.terminals[k];
        term.alpha_hat = alpha[k];
        for (idx, delay) in group.into_iter().zip(delays) {
            let q = sol.row_of(idx).ok_or(Error::IndexNotInSupport(idx))?;
            term.paths.push(PathEstimate {
                delay,
                doppler: paths[q].doppler,
                gains: gains.row(q).to_vec(),
            });
        }
    }
    Ok(estimate)
}
