//! Backward elimination of support indices under the full frame model.
//!
//! Over the `N` training windows, with delays and Dopplers fixed, the stacked
//! observation of antenna `p` is linear in the path gains:
//! `y_p = A g_p + w_p`, where block `i` of `A` is `[D_1 psi_1, ...] diag(eta^i)`.
//! The design is shared by all antennas, so dropping path `q` raises the
//! residual energy by `sum_p |g_qp|^2 / [(A^H A)^-1]_qq`. With `(N G - Q) P`
//! residual degrees of freedom the noise level is well determined, and a
//! path that carries no signal raises the residual by about `P sigma^2`.
//!
//! The same model also exposes what the pursuit missed: its residual is free
//! of the intra-window Doppler leakage of the strong paths, so weak paths
//! crowded out of the pursuit stand out in it.

use super::gains::{window_phases, PathParams};
use super::sensing::{SensingMatrix, StackedMeasurement};
use crate::channel::doppler_phasor;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use rayon::prelude::*;

use crate::numerics::{conj_transpose, dot_conj, least_squares_solve, matmul, norm_sqr, ComplexMatrix, C64};

pub const DEFAULT_PRUNE_Z: f64 = 6.0;

/// Residual energy below this share of the observation counts as noiseless.
const EXACT_FIT: f64 = 1e-12;

/// Drop-one residual increase per path and the noise variance estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct Significance {
    pub delta: Vec<f64>,
    pub noise_var: f64,
    pub observation_energy: f64,
    /// Residual of the frame model in the stacked window layout, one
    /// column per (slot, antenna).
    pub residual: Vec<Vec<C64>>,
}

impl Significance {
    /// Smallest drop-one increase that counts as signal.
    pub fn floor(&self, antennas: usize, z: f64) -> f64 {
        let p = antennas as f64;
        (p * self.noise_var * (1.0 + z / p.sqrt())).max(EXACT_FIT * self.observation_energy)
    }
}

fn frame_design(psi: &SensingMatrix, paths: &[PathParams], cfg: &SystemConfig) -> ComplexMatrix {
    let g = psi.rows();
    let ramped: Vec<Vec<C64>> = paths
        .iter()
        .map(|p| {
            psi.column(p.index)
                .iter()
                .enumerate()
                .map(|(r, c)| doppler_phasor(p.doppler, r as f64, cfg) * c)
                .collect()
        })
        .collect();
    let mut a = ComplexMatrix::zeros(cfg.slots * g, paths.len());
    for i in 0..cfg.slots {
        let eta = window_phases(paths, i, cfg);
        for (q, col) in ramped.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                a[(i * g + r, q)] = v * eta[q];
            }
        }
    }
    a
}

fn frame_observation(meas: &StackedMeasurement) -> ComplexMatrix {
    let g = meas.rows();
    ComplexMatrix::from_fn(meas.slots * g, meas.antennas, |row, p| {
        meas.columns[meas.column_index(row / g, p)][row % g]
    })
}

pub fn path_significance(
    psi: &SensingMatrix,
    meas: &StackedMeasurement,
    paths: &[PathParams],
    cfg: &SystemConfig,
) -> Result<Significance> {
    let y = frame_observation(meas);
    let observation_energy = y.frobenius_norm().powi(2);
    let a = frame_design(psi, paths, cfg);
    let q = paths.len();
    if q == 0 {
        return Ok(Significance {
            delta: Vec::new(),
            noise_var: observation_energy / (y.rows() * y.cols()) as f64,
            observation_energy,
            residual: meas.columns.clone(),
        });
    }
    let dof = (a.rows() - q) * y.cols();
    if dof == 0 {
        return Err(Error::dims("more observations than paths", a.rows()));
    }
    let gains = least_squares_solve(&a, &y)?;
    let fit_err = y.sub(&matmul(&a, &gains)?)?;
    let resid = fit_err.frobenius_norm().powi(2);
    let g = meas.rows();
    let mut residual = vec![vec![C64::new(0.0, 0.0); g]; meas.columns.len()];
    for i in 0..meas.slots {
        for p in 0..meas.antennas {
            let col = &mut residual[meas.column_index(i, p)];
            for (r, v) in col.iter_mut().enumerate() {
                *v = fit_err[(i * g + r, p)];
            }
        }
    }
    let gram = matmul(&conj_transpose(&a), &a)?;
    let gram_inv = least_squares_solve(&gram, &ComplexMatrix::identity(q))?;
    let delta = (0..q)
        .map(|j| gains.row(j).iter().map(|z| z.norm_sqr()).sum::<f64>() / gram_inv[(j, j)].re)
        .collect();
    Ok(Significance {
        delta,
        noise_var: resid / dof as f64,
        observation_energy,
        residual,
    })
}

/// Removes the least significant path until every remaining one explains
/// clearly more than noise. Returns the positions in `paths` that are kept.
pub fn prune_paths(
    psi: &SensingMatrix,
    meas: &StackedMeasurement,
    paths: &[PathParams],
    cfg: &SystemConfig,
    z: f64,
) -> Result<Vec<usize>> {
    let mut kept: Vec<usize> = (0..paths.len()).collect();
    while !kept.is_empty() {
        let current: Vec<PathParams> = kept.iter().map(|&i| paths[i]).collect();
        let sig = path_significance(psi, meas, &current, cfg)?;
        let floor = sig.floor(meas.antennas, z);
        let (weakest, delta) = sig
            .delta
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if delta > floor {
            log::debug!("kept {} paths, weakest {delta:.3e} > {floor:.3e}, energy {:.3e}", kept.len(), sig.observation_energy);
            break;
        }
        log::debug!("pruning support index {} ({delta:.3e} <= {floor:.3e})", paths[kept[weakest]].index);
        kept.remove(weakest);
    }
    Ok(kept)
}

/// Dictionary column outside `support` that best matches the frame-model
/// residual, scored like the pursuit: summed correlation magnitudes over
/// unit-norm columns.
pub fn best_unexplained_atom(psi: &SensingMatrix, residual: &[Vec<C64>], support: &[usize]) -> Option<usize> {
    (0..psi.cols())
        .into_par_iter()
        .filter(|j| !support.contains(j))
        .filter_map(|j| {
            let col = psi.column(j);
            let n = norm_sqr(col).sqrt();
            (n > 0.0).then(|| {
                let s: f64 = residual.iter().map(|r| dot_conj(col, r).norm()).sum();
                (j, s / n)
            })
        })
        .reduce_with(|a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
        .map(|(j, _)| j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airlink::add_noise;
    use crate::channel::draw_realization;
    use crate::detector::{build_sensing_matrix, extract_isi_free};
    use crate::harness::{noiseless_rx, true_support};
    use crate::modem::training_sequences;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(noise_var: f64, seed: u64) -> (SystemConfig, SensingMatrix, StackedMeasurement, Vec<PathParams>) {
        let cfg = SystemConfig {
            subcarriers: 64,
            slots: 8,
            ts_len: 32,
            delay_span: 9,
            terminals: 12,
            active_terminals: 3,
            upa_x: 4,
            upa_y: 4,
            ..SystemConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = draw_realization(&cfg, &mut rng).unwrap();
        let mut rx = noiseless_rx(&truth, &cfg, &mut rng).unwrap();
        add_noise(&mut rx, noise_var, seed);
        let psi = build_sensing_matrix(&training_sequences(&cfg), cfg.delay_span).unwrap();
        let meas = extract_isi_free(&rx, &cfg).unwrap();
        let paths = true_support(&truth, &cfg)
            .into_iter()
            .map(|index| {
                let prof = &truth.profiles[index / cfg.delay_span];
                PathParams { index, delay: prof.delay, doppler: prof.doppler }
            })
            .collect();
        (cfg, psi, meas, paths)
    }

    fn with_spurious(paths: &[PathParams], extra: &[usize], l: usize) -> Vec<PathParams> {
        let mut all = paths.to_vec();
        all.extend(extra.iter().map(|&index| PathParams { index, delay: index % l, doppler: 0.1 }));
        all
    }

    #[test]
    fn noiseless_true_paths_fit_exactly() {
        let (cfg, psi, meas, paths) = setup(0.0, 1);
        let sig = path_significance(&psi, &meas, &paths, &cfg).unwrap();
        assert!(sig.noise_var < 1e-20 * sig.observation_energy);
        assert!(sig.delta.iter().all(|&d| d > 1e-6 * sig.observation_energy));
    }

    #[test]
    fn spurious_paths_pruned_and_true_kept() {
        for (noise, seed) in [(0.0, 2), (1e-2, 3), (1e-1, 4)] {
            let (cfg, psi, meas, paths) = setup(noise, seed);
            let extra: Vec<usize> = [0, 17, 50, 101].into_iter().filter(|j| !paths.iter().any(|p| p.index == *j)).collect();
            let all = with_spurious(&paths, &extra, cfg.delay_span);
            let kept = prune_paths(&psi, &meas, &all, &cfg, DEFAULT_PRUNE_Z).unwrap();
            assert_eq!(kept, (0..paths.len()).collect::<Vec<_>>(), "noise {noise}");
        }
    }

    #[test]
    fn null_statistic_scales_with_antennas() {
        // A spurious path raises the residual by about P sigma^2.
        let noise = 0.05;
        let mut ratios = Vec::new();
        for seed in 10..20 {
            let (cfg, psi, meas, paths) = setup(noise, seed);
            let spur = (0..psi.cols()).find(|j| !paths.iter().any(|p| p.index == *j)).unwrap();
            let all = with_spurious(&paths, &[spur], cfg.delay_span);
            let sig = path_significance(&psi, &meas, &all, &cfg).unwrap();
            ratios.push(sig.delta[paths.len()] / (cfg.antennas() as f64 * noise));
            assert!((sig.noise_var / noise - 1.0).abs() < 0.1, "{}", sig.noise_var);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((mean - 1.0).abs() < 0.2, "{mean}");
    }

    #[test]
    fn missing_path_found_in_residual() {
        let (cfg, psi, meas, paths) = setup(1e-3, 5);
        let (dropped, rest) = paths.split_first().unwrap();
        let sig = path_significance(&psi, &meas, rest, &cfg).unwrap();
        let support: Vec<usize> = rest.iter().map(|p| p.index).collect();
        assert_eq!(best_unexplained_atom(&psi, &sig.residual, &support), Some(dropped.index));
    }
}
