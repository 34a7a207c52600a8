use crate::airlink::RxFrame;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::modem::TrainingSequence;
use crate::numerics::{ComplexMatrix, C64};

/// Dictionary `[Psi_1, ..., Psi_K]` of per-terminal Toeplitz blocks.
///
/// Column `k * L + l` is terminal `k`'s training sequence delayed by `l`
/// samples and observed over the ISI-free window: row `r` holds
/// `c_k[L - 1 + r - l]`.
#[derive(Clone, Debug)]
pub struct SensingMatrix {
    rows: usize,
    delay_span: usize,
    columns: Vec<Vec<C64>>,
}

impl SensingMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn delay_span(&self) -> usize {
        self.delay_span
    }

    pub fn terminals(&self) -> usize {
        self.columns.len() / self.delay_span
    }

    pub fn column(&self, j: usize) -> &[C64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<C64>] {
        &self.columns
    }

    /// Block `Psi_k` as a `G x L` matrix.
    pub fn block(&self, k: usize) -> ComplexMatrix {
        let idx: Vec<usize> = (k * self.delay_span..(k + 1) * self.delay_span).collect();
        self.select(&idx)
    }

    /// `Psi_I`, the columns in `support` in the order given.
    pub fn select(&self, support: &[usize]) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.rows, support.len(), |r, c| self.columns[support[c]][r])
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.rows, self.cols(), |r, c| self.columns[c][r])
    }
}

pub fn build_sensing_matrix(ts_list: &[TrainingSequence], delay_span: usize) -> Result<SensingMatrix> {
    let ts_len = ts_list.first().map_or(0, TrainingSequence::len);
    if delay_span == 0 || ts_len <= delay_span {
        return Err(Error::InvalidConfig(format!(
            "training length {ts_len} must exceed delay span {delay_span}"
        )));
    }
    if let Some(bad) = ts_list.iter().find(|t| t.len() != ts_len) {
        return Err(Error::dims(ts_len, bad.len()));
    }
    let rows = ts_len - delay_span + 1;
    let mut columns = Vec::with_capacity(ts_list.len() * delay_span);
    for ts in ts_list {
        let c = ts.samples();
        for l in 0..delay_span {
            columns.push((0..rows).map(|r| c[delay_span - 1 + r - l]).collect());
        }
    }
    Ok(SensingMatrix {
        rows,
        delay_span,
        columns,
    })
}

/// Stacked ISI-free observations `R_TS = [R^1, ..., R^N]`, `G x NP`.
///
/// Column `i * P + p` holds slot `i`, antenna `p` (zero-based).
#[derive(Clone, Debug, PartialEq)]
pub struct StackedMeasurement {
    pub slots: usize,
    pub antennas: usize,
    pub columns: Vec<Vec<C64>>,
}

impl StackedMeasurement {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column_index(&self, slot: usize, antenna: usize) -> usize {
        slot * self.antennas + antenna
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_columns(&self.columns).expect("measurement columns share a length")
    }
}

/// Cuts the last `G` samples of every received TS block.
pub fn extract_isi_free(rx: &RxFrame, cfg: &SystemConfig) -> Result<StackedMeasurement> {
    cfg.validate()?;
    rx.check_dims(cfg)?;
    let g = cfg.isi_free_len();
    let mut columns = Vec::with_capacity(cfg.slots * cfg.antennas());
    for i in 0..cfg.slots {
        let start = cfg.isi_free_start(i);
        for ant in &rx.antennas {
            columns.push(ant[start..start + g].to_vec());
        }
    }
    Ok(StackedMeasurement {
        slots: cfg.slots,
        antennas: cfg.antennas(),
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::generate_ts;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn smallest_toeplitz_layout() {
        let ts = TrainingSequence(vec![c(0.0), c(1.0), c(2.0), c(3.0)]);
        let psi = build_sensing_matrix(&[ts], 2).unwrap();
        assert_eq!(psi.rows(), 3);
        let want = ComplexMatrix::from_rows(&[
            vec![c(1.0), c(0.0)],
            vec![c(2.0), c(1.0)],
            vec![c(3.0), c(2.0)],
        ])
        .unwrap();
        assert_eq!(psi.block(0), want);
    }

    #[test]
    fn unit_delay_span_is_the_whole_sequence() {
        let ts = generate_ts(2, 16, 5);
        let psi = build_sensing_matrix(std::slice::from_ref(&ts), 1).unwrap();
        assert_eq!(psi.rows(), 16);
        assert_eq!(psi.column(0), ts.samples());
    }

    #[test]
    fn column_energy_is_window_length() {
        let ts: Vec<_> = (0..4).map(|k| generate_ts(k, 64, 0)).collect();
        let psi = build_sensing_matrix(&ts, 33).unwrap();
        assert_eq!(psi.cols(), 4 * 33);
        for j in 0..psi.cols() {
            let e: f64 = psi.column(j).iter().map(|z| z.norm_sqr()).sum();
            assert!((e - 32.0).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_short_sequences() {
        let ts = generate_ts(0, 8, 0);
        assert!(matches!(build_sensing_matrix(&[ts], 8), Err(Error::InvalidConfig(_))));
    }
}
