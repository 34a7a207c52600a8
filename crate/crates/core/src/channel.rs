//! Terrestrial-satellite link model: single-tap line-of-sight delay-domain
//! channel with a per-terminal Doppler rotation and UPA steering.

use std::f64::consts::PI;
use std::io::Write;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{SystemConfig, SPEED_OF_LIGHT};
use crate::error::Result;
use crate::numerics::C64;

/// Ground truth for one potential terminal. Terminal ids are zero-based.
#[derive(Clone, Debug, PartialEq)]
pub struct TerminalProfile {
    pub id: usize,
    pub active: bool,
    /// Small-scale fading factor.
    pub gain: C64,
    /// Doppler in cycles per frame (`N (M + M_t)` samples).
    pub doppler: f64,
    /// Integer delay in samples, `0 <= delay < L`.
    pub delay: usize,
    pub elevation: f64,
    pub azimuth: f64,
    pub steering: Vec<C64>,
}

impl TerminalProfile {
    /// Effective per-antenna gain `g_k [v_k]_p`.
    pub fn effective_gain(&self, antenna: usize) -> C64 {
        self.gain * self.steering[antenna]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub profiles: Vec<TerminalProfile>,
    /// Ids of active terminals, ascending.
    pub active_set: Vec<usize>,
}

impl ChannelRealization {
    /// Activity indicators as 0/1 values.
    pub fn activity(&self) -> Vec<u8> {
        self.profiles.iter().map(|p| p.active as u8).collect()
    }

    pub fn active_profiles(&self) -> impl Iterator<Item = &TerminalProfile> {
        self.active_set.iter().map(move |&k| &self.profiles[k])
    }
}

/// Half-wavelength UPA response; antenna `(a, b)` sits at flat index `a * P_y + b`.
pub fn steering_vector(p_x: usize, p_y: usize, theta: f64, phi: f64) -> Vec<C64> {
    let u = theta.sin() * phi.cos();
    let v = theta.sin() * phi.sin();
    let mut out = Vec::with_capacity(p_x * p_y);
    for a in 0..p_x {
        for b in 0..p_y {
            out.push(C64::from_polar(1.0, PI * (a as f64 * u + b as f64 * v)));
        }
    }
    out
}

/// Delay-domain CIR `h_{k,p}[kappa, ell]`.
pub fn cir(profile: &TerminalProfile, antenna: usize, kappa: usize, ell: usize, cfg: &SystemConfig) -> C64 {
    if ell != profile.delay {
        return C64::new(0.0, 0.0);
    }
    profile.effective_gain(antenna) * doppler_phasor(profile.doppler, kappa as f64 - ell as f64, cfg)
}

/// `exp(j 2 pi doppler * offset / (N (M + M_t)))`.
pub fn doppler_phasor(doppler: f64, offset: f64, cfg: &SystemConfig) -> C64 {
    C64::from_polar(1.0, 2.0 * PI * doppler * offset / cfg.frame_len() as f64)
}

fn complex_gaussian(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Physical Doppler of one terminal in Hz: a satellite term uniform in
/// magnitude over `[0, max_doppler_hz]` with random sign (approaching or
/// receding pass), plus the terminal's own motion projected on the link.
fn draw_doppler_hz(cfg: &SystemConfig, rng: &mut impl Rng) -> f64 {
    let sat = rng.random_range(0.0..=cfg.max_doppler_hz);
    let sat = if rng.random::<bool>() { sat } else { -sat };
    let speed = rng.random_range(0.0..=cfg.max_terminal_speed);
    let cos_dir: f64 = rng.random_range(-1.0..=1.0);
    sat + speed * cos_dir * cfg.carrier_freq / SPEED_OF_LIGHT
}

/// Clips a normalized Doppler into the open interval `(-N/2, N/2)`.
pub fn clip_doppler(doppler: f64, cfg: &SystemConfig) -> f64 {
    let limit = cfg.doppler_limit() * (1.0 - 1e-9);
    doppler.clamp(-limit, limit)
}

pub fn draw_realization(cfg: &SystemConfig, rng: &mut impl Rng) -> Result<ChannelRealization> {
    cfg.validate()?;
    let mut active_set = sample(rng, cfg.terminals, cfg.active_terminals).into_vec();
    active_set.sort_unstable();

    let mut profiles = Vec::with_capacity(cfg.terminals);
    for id in 0..cfg.terminals {
        let gain = complex_gaussian(rng);
        let doppler = clip_doppler(cfg.normalized_doppler(draw_doppler_hz(cfg, rng)), cfg);
        let delay = rng.random_range(0..cfg.delay_span);
        let elevation = rng.random_range(0.0..PI / 2.0);
        let azimuth = rng.random_range(0.0..2.0 * PI);
        profiles.push(TerminalProfile {
            id,
            active: false,
            gain,
            doppler,
            delay,
            elevation,
            azimuth,
            steering: steering_vector(cfg.upa_x, cfg.upa_y, elevation, azimuth),
        });
    }
    for &k in &active_set {
        profiles[k].active = true;
    }
    Ok(ChannelRealization {
        profiles,
        active_set,
    })
}

/// Debug dump: one CSV row per (terminal, antenna).
pub fn write_trace(realization: &ChannelRealization, mut out: impl Write) -> Result<()> {
    writeln!(out, "k,p,alpha,ell,upsilon_re,gain_re,gain_im,steer_re,steer_im")?;
    for prof in &realization.profiles {
        for (p, s) in prof.steering.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{:e},{:e},{:e},{:e},{:e}",
                prof.id, p, prof.active as u8, prof.delay, prof.doppler, prof.gain.re, prof.gain.im, s.re, s.im
            )?;
        }
    }
    Ok(())
}
