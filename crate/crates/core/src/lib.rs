//! Grant-free NOMA-OTFS uplink for LEO satellite IoT.
//!
//! Terminals append a known training sequence after every OTFS symbol. The
//! satellite receiver detects which terminals are active and estimates their
//! delay, Doppler and per-antenna gains from the interference-free tails of
//! those training blocks.
//!
//! * [`channel`]: ground-truth terminal profiles and the delay-domain CIR.
//! * [`modem`]: ISFFT, Heisenberg transform and TS-OTFS frame assembly.
//! * [`airlink`]: multi-user superposition and AWGN at a calibrated SNR.
//! * [`detector`]: the receiver.
//! * [`harness`]: metrics, the oracle baseline and Monte Carlo sweeps.

pub mod airlink;
pub mod channel;
pub mod config;
pub mod detector;
pub mod error;
pub mod harness;
pub mod modem;
pub mod numerics;

pub use config::SystemConfig;
pub use error::{Error, Result};
