use super::somp::RecoverySolution;
use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;

/// Terminal owning dictionary column `index`.
pub fn terminal_of(index: usize, delay_span: usize) -> usize {
    index / delay_span
}

/// Activity indicators: terminal `k` is active iff some support index falls
/// in `[k L, (k + 1) L)`. Returns the indicators and the detected ids.
pub fn detect_activity(sol: &RecoverySolution, terminals: usize, delay_span: usize) -> (Vec<u8>, Vec<usize>) {
    let mut alpha = vec![0u8; terminals];
    for &idx in &sol.support {
        let k = terminal_of(idx, delay_span);
        if k < terminals {
            alpha[k] = 1;
        }
    }
    let active = (0..terminals).filter(|&k| alpha[k] == 1).collect();
    (alpha, active)
}

/// Support indices belonging to terminal `k`, in selection order.
pub fn support_group(sol: &RecoverySolution, k: usize, delay_span: usize) -> Vec<usize> {
    sol.support
        .iter()
        .copied()
        .filter(|&idx| terminal_of(idx, delay_span) == k)
        .collect()
}

/// Delay candidates `omega - k L` of terminal `k`; one per support index.
pub fn extract_delays(sol: &RecoverySolution, k: usize, delay_span: usize) -> Result<Vec<usize>> {
    let group = support_group(sol, k, delay_span);
    if group.is_empty() {
        return Err(Error::TerminalInactive(k));
    }
    Ok(group.into_iter().map(|idx| idx - k * delay_span).collect())
}

/// Reshapes the recovered row of support index `index` into an `N x P`
/// matrix with entry `(i, p)` taken from stacked column `i P + p`.
pub fn effective_cir_matrix(sol: &RecoverySolution, index: usize, slots: usize, antennas: usize) -> Result<ComplexMatrix> {
    let row = sol.row_of(index).ok_or(Error::IndexNotInSupport(index))?;
    if sol.coeffs.cols() != slots * antennas {
        return Err(Error::dims(slots * antennas, sol.coeffs.cols()));
    }
    let coeffs = sol.coeffs.row(row);
    Ok(ComplexMatrix::from_fn(slots, antennas, |i, p| coeffs[i * antennas + p]))
}
