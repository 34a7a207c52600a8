//! TS-OTFS transmitter: QPSK on the delay-Doppler grid, ISFFT, Heisenberg
//! transform, and a known training sequence appended after every OTFS symbol
//! in place of a cyclic prefix.

use std::f64::consts::FRAC_1_SQRT_2;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, C64};

/// Known per-terminal training sequence `c_k`, unit-modulus QPSK.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSequence(pub Vec<C64>);

impl TrainingSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn samples(&self) -> &[C64] {
        &self.0
    }
}

/// One terminal's transmit frame at each stage of the modulator.
#[derive(Clone, Debug, PartialEq)]
pub struct OtfsFrame {
    /// `M x N` delay-Doppler symbols.
    pub dd_symbols: ComplexMatrix,
    /// `M x N` time-frequency symbols.
    pub tf_symbols: ComplexMatrix,
    /// Serialized `[s_1; c; s_2; c; ...; s_N; c]`, length `(M + M_t) N`.
    pub time_signal: Vec<C64>,
}

/// Gray-mapped QPSK with unit average energy.
pub fn qpsk(b0: bool, b1: bool) -> C64 {
    let re = if b0 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    let im = if b1 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    C64::new(re, im)
}

/// Pseudo-random QPSK training sequence of terminal `k`.
///
/// The sequence is drawn from ChaCha stream `k` of `seed`, so every terminal
/// gets an independent, reproducible sequence.
pub fn generate_ts(k: usize, ts_len: usize, seed: u64) -> TrainingSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    TrainingSequence((0..ts_len).map(|_| qpsk(rng.random(), rng.random())).collect())
}

/// Training sequences for all `K` potential terminals.
pub fn training_sequences(cfg: &SystemConfig) -> Vec<TrainingSequence> {
    (0..cfg.terminals)
        .map(|k| generate_ts(k, cfg.ts_len, cfg.ts_seed))
        .collect()
}

fn fft_rows(grid: &mut ComplexMatrix, fft: &dyn Fft<f64>) {
    for r in 0..grid.rows() {
        fft.process(grid.row_mut(r));
    }
}

fn fft_columns(grid: &mut ComplexMatrix, fft: &dyn Fft<f64>) {
    let mut buf = vec![C64::new(0.0, 0.0); grid.rows()];
    for c in 0..grid.cols() {
        for (r, b) in buf.iter_mut().enumerate() {
            *b = grid[(r, c)];
        }
        fft.process(&mut buf);
        grid.set_column(c, &buf);
    }
}

fn scaled(grid: ComplexMatrix, s: f64) -> ComplexMatrix {
    grid.scale(C64::new(s, 0.0))
}

/// Inverse symplectic finite Fourier transform (unitary):
/// `X_tf[m,n] = 1/sqrt(MN) sum_{l,q} X_dd[l,q] exp(j2pi(nq/N - ml/M))`.
pub fn isfft(dd: &ComplexMatrix) -> ComplexMatrix {
    let (m, n) = dd.shape();
    let mut planner = FftPlanner::new();
    let mut out = dd.clone();
    fft_rows(&mut out, planner.plan_fft_inverse(n).as_ref());
    fft_columns(&mut out, planner.plan_fft_forward(m).as_ref());
    scaled(out, 1.0 / ((m * n) as f64).sqrt())
}

/// Symplectic finite Fourier transform, the inverse of [`isfft`].
pub fn sfft(tf: &ComplexMatrix) -> ComplexMatrix {
    let (m, n) = tf.shape();
    let mut planner = FftPlanner::new();
    let mut out = tf.clone();
    fft_rows(&mut out, planner.plan_fft_forward(n).as_ref());
    fft_columns(&mut out, planner.plan_fft_inverse(m).as_ref());
    scaled(out, 1.0 / ((m * n) as f64).sqrt())
}

/// Heisenberg transform with a rectangular pulse: unitary IDFT of each column.
pub fn heisenberg(tf: &ComplexMatrix) -> ComplexMatrix {
    let m = tf.rows();
    let mut out = tf.clone();
    fft_columns(&mut out, FftPlanner::new().plan_fft_inverse(m).as_ref());
    scaled(out, 1.0 / (m as f64).sqrt())
}

/// Wigner transform, the inverse of [`heisenberg`].
pub fn wigner(time: &ComplexMatrix) -> ComplexMatrix {
    let m = time.rows();
    let mut out = time.clone();
    fft_columns(&mut out, FftPlanner::new().plan_fft_forward(m).as_ref());
    scaled(out, 1.0 / (m as f64).sqrt())
}

/// Modulates a given delay-Doppler grid and appends `ts` after every symbol.
pub fn build_frame_from_grid(dd: ComplexMatrix, ts: &TrainingSequence, cfg: &SystemConfig) -> Result<OtfsFrame> {
    cfg.validate()?;
    if dd.shape() != (cfg.subcarriers, cfg.slots) {
        return Err(Error::dims(
            format!("{}x{} grid", cfg.subcarriers, cfg.slots),
            format!("{:?}", dd.shape()),
        ));
    }
    if ts.len() != cfg.ts_len {
        return Err(Error::dims(cfg.ts_len, ts.len()));
    }
    let tf = isfft(&dd);
    let symbols = heisenberg(&tf);
    let mut time_signal = Vec::with_capacity(cfg.frame_len());
    for n in 0..cfg.slots {
        time_signal.extend(symbols.column(n));
        time_signal.extend_from_slice(ts.samples());
    }
    Ok(OtfsFrame {
        dd_symbols: dd,
        tf_symbols: tf,
        time_signal,
    })
}

/// Random QPSK payload for terminal `k`, modulated into a full frame.
pub fn build_frame(k: usize, cfg: &SystemConfig, rng: &mut impl Rng) -> Result<OtfsFrame> {
    let dd = ComplexMatrix::from_fn(cfg.subcarriers, cfg.slots, |_, _| qpsk(rng.random(), rng.random()));
    build_frame_from_grid(dd, &generate_ts(k, cfg.ts_len, cfg.ts_seed), cfg)
}

/// Writes one length-prefixed block: `u64` sample count, then interleaved
/// `(re, im)` as little-endian `f64`.
pub fn write_samples(out: &mut impl Write, samples: &[C64]) -> Result<()> {
    out.write_all(&(samples.len() as u64).to_le_bytes())?;
    for z in samples {
        out.write_all(&z.re.to_le_bytes())?;
        out.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

/// Reads one block written by [`write_samples`]; `None` at clean end of input.
pub fn read_samples(input: &mut impl Read) -> Result<Option<Vec<C64>>> {
    let mut len = [0u8; 8];
    match input.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let n = u64::from_le_bytes(len) as usize;
    let mut out = Vec::with_capacity(n);
    let mut word = [0u8; 8];
    for _ in 0..n {
        input.read_exact(&mut word)?;
        let re = f64::from_le_bytes(word);
        input.read_exact(&mut word)?;
        let im = f64::from_le_bytes(word);
        out.push(C64::new(re, im));
    }
    Ok(Some(out))
}

/// Reads every block until end of input.
pub fn read_all_samples(input: &mut impl Read) -> Result<Vec<Vec<C64>>> {
    let mut blocks = Vec::new();
    while let Some(b) = read_samples(input)? {
        blocks.push(b);
    }
    Ok(blocks)
}

/// CSV view of a sample stream for inspection: `index,re,im`.
pub fn write_samples_csv(out: &mut impl Write, samples: &[C64]) -> Result<()> {
    writeln!(out, "index,re,im")?;
    for (i, z) in samples.iter().enumerate() {
        writeln!(out, "{i},{:e},{:e}", z.re, z.im)?;
    }
    Ok(())
}
