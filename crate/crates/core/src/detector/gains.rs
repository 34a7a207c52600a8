//! Effective fading factors from the recovered coefficients.
//!
//! With Doppler compensated inside each ISI-free window, the coefficient
//! vector recovered for slot `i` and antenna `p` obeys
//! `h^i_p = Gamma (eta^i .* g_p)`, where `Gamma = pinv(Psi_I) [D_1 psi_1, ...]`
//! couples the paths through their intra-window Doppler ramps `D_q`, and
//! `eta^i` carries each path's phase at the start of window `i`.

use super::sensing::SensingMatrix;
use super::somp::RecoverySolution;
use crate::channel::doppler_phasor;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::numerics::{least_squares_solve, ComplexMatrix, C64};

/// Delay/Doppler hypothesis for one support index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathParams {
    pub index: usize,
    pub delay: usize,
    pub doppler: f64,
}

/// `Gamma = pinv(Psi_I) [D_1 psi_1, ..., D_Q psi_Q]`, with
/// `D_q = diag(exp(j 2 pi v_q r / (N (M + M_t))))` over window rows `r`.
pub fn coupling_matrix(psi: &SensingMatrix, paths: &[PathParams], cfg: &SystemConfig) -> Result<ComplexMatrix> {
    let support: Vec<usize> = paths.iter().map(|p| p.index).collect();
    let psi_i = psi.select(&support);
    let ramped = ComplexMatrix::from_fn(psi.rows(), paths.len(), |r, q| {
        doppler_phasor(paths[q].doppler, r as f64, cfg) * psi.column(paths[q].index)[r]
    });
    least_squares_solve(&psi_i, &ramped)
}

/// Phase of every path at the first ISI-free sample of slot `slot`.
pub fn window_phases(paths: &[PathParams], slot: usize, cfg: &SystemConfig) -> Vec<C64> {
    let kappa = cfg.isi_free_start(slot) as f64;
    paths
        .iter()
        .map(|p| doppler_phasor(p.doppler, kappa - p.delay as f64, cfg))
        .collect()
}

fn check_alignment(sol: &RecoverySolution, paths: &[PathParams], cfg: &SystemConfig) -> Result<()> {
    if paths.len() != sol.support.len() || paths.iter().zip(&sol.support).any(|(p, &s)| p.index != s) {
        return Err(Error::dims("paths aligned with support", format!("{} paths", paths.len())));
    }
    let np = cfg.slots * cfg.antennas();
    if sol.coeffs.cols() != np {
        return Err(Error::dims(np, sol.coeffs.cols()));
    }
    Ok(())
}

/// Per-path effective gains as a `|I| x P` matrix.
///
/// For each antenna the `N` slots are solved jointly:
/// `min_g sum_i || h^i_p - Gamma diag(eta^i) g ||^2`.
pub fn estimate_gains(
    sol: &RecoverySolution,
    paths: &[PathParams],
    psi: &SensingMatrix,
    cfg: &SystemConfig,
) -> Result<ComplexMatrix> {
    check_alignment(sol, paths, cfg)?;
    let q = paths.len();
    let p_count = cfg.antennas();
    if q == 0 {
        return Ok(ComplexMatrix::zeros(0, p_count));
    }
    let gamma = coupling_matrix(psi, paths, cfg)?;

    let mut design = ComplexMatrix::zeros(cfg.slots * q, q);
    let mut rhs = ComplexMatrix::zeros(cfg.slots * q, p_count);
    for i in 0..cfg.slots {
        let eta = window_phases(paths, i, cfg);
        for r in 0..q {
            for c in 0..q {
                design[(i * q + r, c)] = gamma[(r, c)] * eta[c];
            }
            for p in 0..p_count {
                rhs[(i * q + r, p)] = sol.coeffs[(r, i * p_count + p)];
            }
        }
    }
    least_squares_solve(&design, &rhs)
}

/// Removes inter-path coupling from the recovered coefficients:
/// returns `Gamma^{-1} H` so that row `q` carries path `q` alone.
pub fn decouple(
    sol: &RecoverySolution,
    paths: &[PathParams],
    psi: &SensingMatrix,
    cfg: &SystemConfig,
) -> Result<ComplexMatrix> {
    check_alignment(sol, paths, cfg)?;
    if paths.is_empty() {
        return Ok(sol.coeffs.clone());
    }
    let gamma = coupling_matrix(psi, paths, cfg)?;
    least_squares_solve(&gamma, &sol.coeffs)
}
