//! Simultaneous orthogonal matching pursuit over the stacked measurements.
//!
//! The correlation matrix `Psi^H * residual` is kept up to date with rank-one
//! corrections: each accepted atom is orthonormalized against the current
//! basis, and projecting its direction out of the residual changes the
//! correlations by `(Psi^H q)(q^H residual)`. Coefficients on the final
//! support are then re-solved by Householder least squares.

use rayon::prelude::*;

use super::sensing::{SensingMatrix, StackedMeasurement};
use crate::error::{Error, Result};
use crate::numerics::{dot_conj, least_squares_solve, norm_sqr, ComplexMatrix, C64};

/// When to stop adding atoms. A cap of `G - 1` iterations always applies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StoppingRule {
    /// Known sparsity: stop after exactly this many atoms.
    FixedSparsity(usize),
    /// Activity-agnostic rule. An atom is rejected, and pursuit ends, when
    /// the residual energy it would remove is not larger than
    /// `(1 + epsilon)` times what the best of the remaining columns removes
    /// from a residual consisting of noise only at the floor estimated from
    /// the current residual.
    ResidualThreshold { epsilon: f64 },
}

impl Default for StoppingRule {
    fn default() -> Self {
        StoppingRule::ResidualThreshold {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct RecoverySolution {
    /// Selected column indices into `[0, KL)`, in selection order.
    pub support: Vec<usize>,
    /// `|support| x NP` least-squares coefficients, rows aligned with `support`.
    pub coeffs: ComplexMatrix,
    pub residual_norm: f64,
    /// Residual Frobenius norm before the first and after every accepted atom.
    pub residual_history: Vec<f64>,
}

impl RecoverySolution {
    pub fn row_of(&self, index: usize) -> Option<usize> {
        self.support.iter().position(|&j| j == index)
    }
}

/// Expected largest share of an unstructured residual's energy captured by
/// the best of `candidates` unit atoms, relative to the per-dimension mean,
/// when each score sums `measurements` independent magnitudes.
///
/// Each score is a sum of `measurements` Rayleigh magnitudes with relative
/// spread `sqrt(4/pi - 1)`; the maximum over `candidates` sits about
/// `sqrt(2 ln candidates)` standard deviations above the mean.
fn noise_capture_factor(candidates: usize, measurements: usize) -> f64 {
    let rel_spread = (4.0 / std::f64::consts::PI - 1.0).sqrt();
    let z = (2.0 * (candidates.max(2) as f64).ln()).sqrt();
    let bias = 1.0 + z * rel_spread / (measurements.max(1) as f64).sqrt();
    bias * bias
}

pub fn somp(psi: &SensingMatrix, meas: &StackedMeasurement, stop: StoppingRule) -> Result<RecoverySolution> {
    let g = psi.rows();
    let kl = psi.cols();
    let np = meas.columns.len();
    if meas.rows() != g {
        return Err(Error::dims(format!("{g} measurement rows"), meas.rows()));
    }
    let cap = g.saturating_sub(1).min(kl);
    if let StoppingRule::FixedSparsity(s) = stop {
        if s > cap {
            return Err(Error::IterationBudgetExhausted { budget: cap });
        }
    }

    let inv_norms: Vec<f64> = psi
        .columns()
        .iter()
        .map(|c| {
            let n = norm_sqr(c).sqrt();
            if n > 0.0 {
                1.0 / n
            } else {
                0.0
            }
        })
        .collect();

    // corr[j * np + c] = <psi_j, residual_c>
    let mut corr = vec![C64::new(0.0, 0.0); kl * np];
    corr.par_chunks_mut(np).enumerate().for_each(|(j, row)| {
        let col = psi.column(j);
        for (out, r) in row.iter_mut().zip(&meas.columns) {
            *out = dot_conj(col, r);
        }
    });

    let row_score = |row: &[C64]| row.iter().map(|z| (z.re * z.re + z.im * z.im).sqrt()).sum::<f64>();
    let mut scores: Vec<f64> = corr.par_chunks(np).map(row_score).collect();

    let mut residual = meas.columns.clone();
    let mut energy: f64 = residual.iter().map(|c| norm_sqr(c)).sum();
    let mut history = vec![energy.sqrt()];
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut support = Vec::new();
    let mut excluded = vec![false; kl];

    loop {
        let t = support.len();
        match stop {
            StoppingRule::FixedSparsity(s) if t == s => break,
            _ => {}
        }
        if t == cap {
            if matches!(stop, StoppingRule::FixedSparsity(_)) {
                return Err(Error::IterationBudgetExhausted { budget: cap });
            }
            break;
        }
        if energy == 0.0 {
            break;
        }

        let best = scores
            .iter()
            .enumerate()
            .filter(|(j, _)| !excluded[*j] && inv_norms[*j] > 0.0)
            .map(|(j, &s)| (j, s * inv_norms[j]))
            .reduce(|a, b| if b.1 > a.1 { b } else { a });
        let Some((j, score)) = best else { break };
        if score == 0.0 {
            break;
        }

        // Orthonormalize the candidate against the current basis (twice, for stability).
        let atom = psi.column(j);
        let mut q = atom.to_vec();
        for _ in 0..2 {
            for b in &basis {
                let d = dot_conj(b, &q);
                for (qi, bi) in q.iter_mut().zip(b) {
                    *qi -= d * bi;
                }
            }
        }
        let q_norm = norm_sqr(&q).sqrt();
        excluded[j] = true;
        if q_norm <= 1e-10 * norm_sqr(atom).sqrt() {
            // Already spanned by the support; it cannot reduce the residual.
            continue;
        }
        q.iter_mut().for_each(|z| *z /= q_norm);

        let proj: Vec<C64> = residual.iter().map(|r| dot_conj(&q, r)).collect();
        let captured = norm_sqr(&proj);

        if let StoppingRule::ResidualThreshold { epsilon } = stop {
            let free_dims = (g - t) as f64;
            let floor = energy / free_dims;
            let candidates = kl - t;
            if captured <= (1.0 + epsilon) * noise_capture_factor(candidates, np) * floor {
                break;
            }
        }

        for (r, d) in residual.iter_mut().zip(&proj) {
            for (ri, qi) in r.iter_mut().zip(&q) {
                *ri -= d * qi;
            }
        }
        let psi_q: Vec<C64> = psi.columns().par_iter().map(|c| dot_conj(c, &q)).collect();
        corr.par_chunks_mut(np)
            .zip(psi_q.par_iter())
            .zip(scores.par_iter_mut())
            .for_each(|((row, b), score)| {
                let mut s = 0.0;
                for (out, d) in row.iter_mut().zip(&proj) {
                    *out -= b * d;
                    s += (out.re * out.re + out.im * out.im).sqrt();
                }
                *score = s;
            });

        basis.push(q);
        support.push(j);
        energy = residual.iter().map(|c| norm_sqr(c)).sum();
        history.push(energy.sqrt());
    }

    let coeffs = if support.is_empty() {
        ComplexMatrix::zeros(0, np)
    } else {
        least_squares_solve(&psi.select(&support), &meas.to_matrix())?
    };
    Ok(RecoverySolution {
        support,
        coeffs,
        residual_norm: energy.sqrt(),
        residual_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::sensing::build_sensing_matrix;
    use crate::modem::generate_ts;
    use crate::numerics::matmul;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dictionary(k: usize, ts_len: usize, l: usize) -> SensingMatrix {
        let ts: Vec<_> = (0..k).map(|i| generate_ts(i, ts_len, 17)).collect();
        build_sensing_matrix(&ts, l).unwrap()
    }

    fn measurement_from(psi: &SensingMatrix, support: &[usize], coeffs: &ComplexMatrix) -> StackedMeasurement {
        let y = matmul(&psi.select(support), coeffs).unwrap();
        StackedMeasurement {
            slots: 1,
            antennas: y.cols(),
            columns: (0..y.cols()).map(|c| y.column(c)).collect(),
        }
    }

    #[test]
    fn single_atom_measurement() {
        let psi = dictionary(5, 16, 4);
        let meas = StackedMeasurement {
            slots: 1,
            antennas: 1,
            columns: vec![psi.column(7).to_vec()],
        };
        let sol = somp(&psi, &meas, StoppingRule::default()).unwrap();
        assert_eq!(sol.support, vec![7]);
        assert!((sol.coeffs[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(sol.residual_norm < 1e-12);
    }

    #[test]
    fn zero_measurement_gives_empty_support() {
        let psi = dictionary(5, 16, 4);
        let meas = StackedMeasurement {
            slots: 2,
            antennas: 2,
            columns: vec![vec![C64::new(0.0, 0.0); psi.rows()]; 4],
        };
        let sol = somp(&psi, &meas, StoppingRule::default()).unwrap();
        assert!(sol.support.is_empty());
        assert_eq!(sol.coeffs.rows(), 0);
    }

    /// Exhaustive 2-sparse least squares over every column pair.
    fn brute_force_pair(psi: &SensingMatrix, meas: &StackedMeasurement) -> (usize, usize) {
        let y = meas.to_matrix();
        let mut best = (f64::INFINITY, (0, 0));
        for a in 0..psi.cols() {
            for b in a + 1..psi.cols() {
                let sub = psi.select(&[a, b]);
                let Ok(x) = least_squares_solve(&sub, &y) else { continue };
                let r = matmul(&sub, &x).unwrap().sub(&y).unwrap().frobenius_norm();
                if r < best.0 {
                    best = (r, (a, b));
                }
            }
        }
        best.1
    }

    #[test]
    fn two_sparse_matches_exhaustive_search() {
        let psi = dictionary(5, 32, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let t1 = rng.random_range(0..5);
            let mut t2 = rng.random_range(0..5);
            while t2 == t1 {
                t2 = rng.random_range(0..5);
            }
            let support = vec![t1 * 4 + rng.random_range(0..4), t2 * 4 + rng.random_range(0..4)];
            let x = ComplexMatrix::from_fn(2, 6, |_, _| C64::new(rng.random::<f64>() + 0.5, rng.random::<f64>() - 0.5));
            let meas = measurement_from(&psi, &support, &x);
            let sol = somp(&psi, &meas, StoppingRule::FixedSparsity(2)).unwrap();
            let mut got = sol.support.clone();
            got.sort_unstable();
            let oracle = brute_force_pair(&psi, &meas);
            assert_eq!((got[0], got[1]), oracle);
            for (row, &j) in sol.support.iter().enumerate() {
                let want_row = support.iter().position(|&s| s == j).unwrap();
                for c in 0..6 {
                    assert!((sol.coeffs[(row, c)] - x[(want_row, c)]).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn residual_is_non_increasing() {
        let psi = dictionary(8, 24, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let columns = (0..12)
            .map(|_| (0..psi.rows()).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect())
            .collect();
        let meas = StackedMeasurement { slots: 3, antennas: 4, columns };
        let sol = somp(&psi, &meas, StoppingRule::FixedSparsity(10)).unwrap();
        assert!(sol.residual_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let mut uniq = sol.support.clone();
        uniq.sort_unstable();
        uniq.dedup();
        assert_eq!(uniq.len(), sol.support.len());
    }

    #[test]
    fn sparsity_beyond_budget_is_an_error() {
        let psi = dictionary(3, 8, 3);
        let meas = StackedMeasurement {
            slots: 1,
            antennas: 1,
            columns: vec![psi.column(0).to_vec()],
        };
        assert!(matches!(
            somp(&psi, &meas, StoppingRule::FixedSparsity(6)),
            Err(Error::IterationBudgetExhausted { budget: 5 })
        ));
    }
}
