//! System dimensioning and physical parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Frame dimensions, population sizes and link physics for one scenario.
///
/// Serialized field names are descriptive; the single-letter names used in
/// the literature (`M`, `N`, `M_t`, `L`, `K`, `K_a`, `P_x`, `P_y`) are
/// accepted as aliases when reading configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Subcarriers per OTFS symbol (delay bins).
    #[serde(alias = "M")]
    pub subcarriers: usize,
    /// OTFS symbols (time slots) per frame.
    #[serde(alias = "N")]
    pub slots: usize,
    /// Training-sequence length in samples.
    #[serde(alias = "M_t")]
    pub ts_len: usize,
    /// Exclusive upper bound on the residual delay, in samples.
    #[serde(alias = "L")]
    pub delay_span: usize,
    /// Potential terminals.
    #[serde(alias = "K")]
    pub terminals: usize,
    /// Active terminals per frame.
    #[serde(alias = "K_a")]
    pub active_terminals: usize,
    #[serde(alias = "P_x")]
    pub upa_x: usize,
    #[serde(alias = "P_y")]
    pub upa_y: usize,
    /// Carrier frequency in Hz.
    pub carrier_freq: f64,
    /// Sample rate in Hz.
    pub bandwidth: f64,
    /// Upper end of the satellite-induced Doppler range, in Hz.
    pub max_doppler_hz: f64,
    /// Upper end of the terminal ground speed range, in m/s.
    pub max_terminal_speed: f64,
    /// Signal-to-noise ratio in dB; `inf` disables noise.
    pub snr_db: f64,
    #[serde(default)]
    pub rng_seed: u64,
    /// Seed of the training-sequence family shared by transmitters and receiver.
    #[serde(default)]
    pub ts_seed: u64,
}

impl Default for SystemConfig {
    /// Simulation parameters of the reference LEO IoT scenario.
    fn default() -> Self {
        Self {
            subcarriers: 256,
            slots: 8,
            ts_len: 64,
            delay_span: 33,
            terminals: 100,
            active_terminals: 10,
            upa_x: 10,
            upa_y: 10,
            carrier_freq: 10e9,
            bandwidth: 122.88e6,
            max_doppler_hz: 178.2e3,
            max_terminal_speed: 100.0,
            snr_db: 20.0,
            rng_seed: 0,
            ts_seed: 0,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.subcarriers == 0 {
            return fail("subcarriers must be positive".into());
        }
        if self.slots < 2 {
            return fail(format!("need at least 2 slots, got {}", self.slots));
        }
        if self.delay_span < 1 {
            return fail("delay_span must be at least 1".into());
        }
        if self.ts_len <= self.delay_span {
            return fail(format!(
                "ts_len ({}) must exceed delay_span ({})",
                self.ts_len, self.delay_span
            ));
        }
        if self.active_terminals > self.terminals {
            return fail(format!(
                "active_terminals ({}) exceeds terminals ({})",
                self.active_terminals, self.terminals
            ));
        }
        if self.upa_x == 0 || self.upa_y == 0 {
            return fail("UPA dimensions must be positive".into());
        }
        if !(self.carrier_freq > 0.0 && self.bandwidth > 0.0) {
            return fail("carrier_freq and bandwidth must be positive".into());
        }
        if !(self.max_doppler_hz >= 0.0 && self.max_terminal_speed >= 0.0) {
            return fail("Doppler and speed ranges must be non-negative".into());
        }
        if self.snr_db.is_nan() {
            return fail("snr_db is NaN".into());
        }
        Ok(())
    }

    /// `P = P_x * P_y`.
    pub fn antennas(&self) -> usize {
        self.upa_x * self.upa_y
    }

    /// Samples per OTFS symbol including its training sequence, `M + M_t`.
    pub fn block_len(&self) -> usize {
        self.subcarriers + self.ts_len
    }

    /// `N (M + M_t)`, the frame length and the Doppler normalization.
    pub fn frame_len(&self) -> usize {
        self.slots * self.block_len()
    }

    /// Rows of the ISI-free observation window, `M_t - L + 1`.
    pub fn isi_free_len(&self) -> usize {
        self.ts_len + 1 - self.delay_span
    }

    /// Converts a physical Doppler shift in Hz to cycles per frame.
    pub fn normalized_doppler(&self, doppler_hz: f64) -> f64 {
        doppler_hz * self.frame_len() as f64 / self.bandwidth
    }

    /// Zero-based sample index of the first ISI-free sample of TS block `slot`.
    pub fn isi_free_start(&self, slot: usize) -> usize {
        slot * self.block_len() + self.subcarriers + self.delay_span - 1
    }

    /// Doppler identifiability limit `N / 2`.
    pub fn doppler_limit(&self) -> f64 {
        self.slots as f64 / 2.0
    }
}
