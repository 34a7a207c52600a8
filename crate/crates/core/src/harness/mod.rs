//! Metrics, the oracle baseline, Monte Carlo sweeps and experiment files.

mod file;
mod metrics;
mod oracle;
mod selftest;
mod sweep;

pub use file::{load_experiment, parse_experiment};
pub use metrics::{aer, nmse};
pub use oracle::{oracle_ls, true_support};
pub use selftest::{model_mismatch, noiseless_rx, selftest, Check};
pub use sweep::{
    format_sig9, mean_ci, run_sweep, run_trial, run_trial_full, trial_seed, write_csv, SweepPoint, SweepSpec,
    TrialOutput, TrialResult, CSV_HEADER,
};
