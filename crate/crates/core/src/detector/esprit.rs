//! TLS-ESPRIT Doppler estimation from an effective CIR matrix whose rows are
//! slots and whose columns are antennas.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{hermitian_eig, ComplexMatrix, C64};

const DEGENERATE_TOLERANCE: f64 = 1e-12;

/// Estimates the Doppler (cycles per frame) of the dominant exponential
/// running down the rows of `upsilon` (`N x P`).
pub fn esprit_doppler(upsilon: &ComplexMatrix) -> Result<f64> {
    let (n, p) = upsilon.shape();
    if n < 2 || p < 1 {
        return Err(Error::dims("at least 2 slots and 1 antenna", format!("{n}x{p}")));
    }
    let d = 2 * (n - 1);

    // Sample covariance of the stacked subarrays x_p = [x_{1,p}; x_{2,p}].
    let mut cov = ComplexMatrix::zeros(d, d);
    let mut x = vec![C64::new(0.0, 0.0); d];
    for col in 0..p {
        for i in 0..n - 1 {
            x[i] = upsilon[(i, col)];
            x[n - 1 + i] = upsilon[(i + 1, col)];
        }
        for r in 0..d {
            for c in 0..d {
                cov[(r, c)] += x[r] * x[c].conj();
            }
        }
    }
    let cov = cov.scale(C64::new(1.0 / p as f64, 0.0));

    let (values, _) = hermitian_eig(&cov)?;
    let noise_floor = values[d - 1];
    let mut denoised = cov;
    for i in 0..d {
        denoised[(i, i)] -= noise_floor;
    }
    let (_, vectors) = hermitian_eig(&denoised)?;
    let u = vectors.column(0);
    let (e1, e2) = u.split_at(n - 1);

    let gram = ComplexMatrix::from_fn(2, 2, |r, c| {
        let a = if r == 0 { e1 } else { e2 };
        let b = if c == 0 { e1 } else { e2 };
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    });
    // Descending order: the second column is the minor eigenvector.
    let (_, e) = hermitian_eig(&gram)?;
    let e12 = e[(0, 1)];
    let e22 = e[(1, 1)];
    if e22.norm() < DEGENERATE_TOLERANCE {
        return Err(Error::DegenerateSubspace(e22.norm()));
    }
    let rotation = -e12 / e22;
    Ok(n as f64 / (2.0 * PI) * rotation.arg())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exponential(doppler: f64, n: usize, p: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gains: Vec<C64> = (0..p)
            .map(|_| C64::from_polar(rng.random_range(0.5..1.5), rng.random_range(0.0..2.0 * PI)))
            .collect();
        ComplexMatrix::from_fn(n, p, |i, col| gains[col] * C64::from_polar(1.0, 2.0 * PI * doppler * i as f64 / n as f64))
    }

    #[test]
    fn static_rows_give_zero() {
        let u = ComplexMatrix::from_fn(8, 4, |_, c| C64::new(1.0 + c as f64, -0.5));
        assert!(esprit_doppler(&u).unwrap().abs() < 1e-9);
    }

    #[test]
    fn recovers_exact_exponential() {
        let v = esprit_doppler(&exponential(1.5, 8, 4, 1)).unwrap();
        assert!((v - 1.5).abs() < 1e-6, "{v}");
    }

    #[test]
    fn boundary_and_aliasing() {
        for &d in &[3.9, -3.9, 3.99] {
            let v = esprit_doppler(&exponential(d, 8, 4, 2)).unwrap();
            assert!((v - d).abs() < 1e-6, "{d} -> {v}");
        }
        // Beyond N/2 the per-slot rotation wraps.
        let v = esprit_doppler(&exponential(4.5, 8, 4, 3)).unwrap();
        assert!((v - (4.5 - 8.0)).abs() < 1e-6, "{v}");
    }

    #[test]
    fn minimal_two_slots() {
        let v = esprit_doppler(&exponential(0.3, 2, 3, 4)).unwrap();
        assert!((v - 0.3).abs() < 1e-9);
        assert!(esprit_doppler(&ComplexMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn scale_invariance() {
        let u = exponential(-2.2, 8, 5, 5);
        let a = esprit_doppler(&u).unwrap();
        let b = esprit_doppler(&u.scale(C64::new(-3.0, 7.5))).unwrap();
        assert!((a - b).abs() < 1e-9);
    }
}
