//! Multi-user uplink superposition at the satellite UPA.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::{doppler_phasor, ChannelRealization};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::modem::OtfsFrame;
use crate::numerics::{ComplexMatrix, C64};

/// Received samples, one vector per antenna, each of length `N (M + M_t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RxFrame {
    pub antennas: Vec<Vec<C64>>,
    pub noise_var: f64,
}

impl RxFrame {
    pub fn zeros(cfg: &SystemConfig) -> Self {
        Self {
            antennas: vec![vec![C64::new(0.0, 0.0); cfg.frame_len()]; cfg.antennas()],
            noise_var: 0.0,
        }
    }

    pub fn sample(&self, kappa: usize, antenna: usize) -> C64 {
        self.antennas[antenna][kappa]
    }

    pub fn frame_len(&self) -> usize {
        self.antennas.first().map_or(0, Vec::len)
    }

    /// Sample-by-antenna matrix (rows are time indices).
    pub fn to_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_columns(&self.antennas).expect("antenna columns share a length")
    }

    /// Mean `|r_p(kappa)|^2` over all samples and antennas.
    pub fn mean_power(&self) -> f64 {
        let count = self.antennas.len() * self.frame_len();
        if count == 0 {
            return 0.0;
        }
        self.antennas.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>() / count as f64
    }

    pub fn check_dims(&self, cfg: &SystemConfig) -> Result<()> {
        if self.antennas.len() != cfg.antennas() {
            return Err(Error::dims(format!("{} antennas", cfg.antennas()), self.antennas.len()));
        }
        if let Some(bad) = self.antennas.iter().find(|a| a.len() != cfg.frame_len()) {
            return Err(Error::dims(format!("{} samples", cfg.frame_len()), bad.len()));
        }
        Ok(())
    }
}

/// Noiseless received signal: `sum_k alpha_k h_{k,p}[kappa, l_k] s_k[kappa - l_k]`,
/// with `s_k` taken as zero before the frame starts.
pub fn synthesize(frames: &[OtfsFrame], realization: &ChannelRealization, cfg: &SystemConfig) -> Result<RxFrame> {
    cfg.validate()?;
    if frames.len() != cfg.terminals {
        return Err(Error::dims(format!("{} frames", cfg.terminals), frames.len()));
    }
    if realization.profiles.len() != cfg.terminals {
        return Err(Error::dims(format!("{} profiles", cfg.terminals), realization.profiles.len()));
    }
    let len = cfg.frame_len();
    if let Some(bad) = frames.iter().find(|f| f.time_signal.len() != len) {
        return Err(Error::dims(format!("{len} samples per frame"), bad.time_signal.len()));
    }

    // Antenna-independent part of each active terminal's contribution.
    let delayed: Vec<(usize, Vec<C64>)> = realization
        .active_profiles()
        .map(|prof| {
            let s = &frames[prof.id].time_signal;
            let mut u = vec![C64::new(0.0, 0.0); len];
            for (kappa, out) in u.iter_mut().enumerate().skip(prof.delay) {
                let offset = (kappa - prof.delay) as f64;
                *out = doppler_phasor(prof.doppler, offset, cfg) * s[kappa - prof.delay];
            }
            (prof.id, u)
        })
        .collect();

    let antennas = (0..cfg.antennas())
        .into_par_iter()
        .map(|p| {
            let mut col = vec![C64::new(0.0, 0.0); len];
            for (k, u) in &delayed {
                let g = realization.profiles[*k].effective_gain(p);
                for (c, x) in col.iter_mut().zip(u) {
                    *c += g * x;
                }
            }
            col
        })
        .collect();
    Ok(RxFrame {
        antennas,
        noise_var: 0.0,
    })
}

/// Noise variance giving the configured SNR, where SNR is the mean noiseless
/// received power per antenna and sample divided by `sigma_w^2`.
pub fn calibrate_noise(cfg: &SystemConfig, realization: &ChannelRealization, noiseless: &RxFrame) -> Result<f64> {
    let power = noiseless.mean_power();
    if realization.active_set.is_empty() || power == 0.0 {
        return Err(Error::NoActiveTerminals);
    }
    if cfg.snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(power * 10f64.powf(-cfg.snr_db / 10.0))
}

/// Adds `CN(0, noise_var)` noise. Antenna `p` draws from ChaCha stream `p`
/// of `seed`, so the result does not depend on scheduling.
pub fn add_noise(rx: &mut RxFrame, noise_var: f64, seed: u64) {
    rx.noise_var = noise_var;
    if noise_var == 0.0 {
        return;
    }
    let std = (noise_var / 2.0).sqrt();
    rx.antennas.par_iter_mut().enumerate().for_each(|(p, col)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(p as u64);
        for z in col.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z += C64::new(re * std, im * std);
        }
    });
}

/// Received frame at the configured SNR.
pub fn propagate(
    frames: &[OtfsFrame],
    realization: &ChannelRealization,
    cfg: &SystemConfig,
    rng: &mut impl RngCore,
) -> Result<RxFrame> {
    let mut rx = synthesize(frames, realization, cfg)?;
    let noise_var = match calibrate_noise(cfg, realization, &rx) {
        Ok(v) => v,
        Err(Error::NoActiveTerminals) => {
            log::warn!("no active terminals; SNR undefined, receiving without noise");
            0.0
        }
        Err(e) => return Err(e),
    };
    add_noise(&mut rx, noise_var, rng.next_u64());
    Ok(rx)
}

/// Received frame with an explicit noise variance.
pub fn propagate_with_noise_var(
    frames: &[OtfsFrame],
    realization: &ChannelRealization,
    cfg: &SystemConfig,
    noise_var: f64,
    rng: &mut impl RngCore,
) -> Result<RxFrame> {
    let mut rx = synthesize(frames, realization, cfg)?;
    add_noise(&mut rx, noise_var, rng.next_u64());
    Ok(rx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{cir, draw_realization, steering_vector, TerminalProfile};
    use crate::modem::build_frame;

    fn small_cfg() -> SystemConfig {
        SystemConfig {
            subcarriers: 32,
            slots: 4,
            ts_len: 16,
            delay_span: 6,
            terminals: 5,
            active_terminals: 2,
            upa_x: 2,
            upa_y: 2,
            ..SystemConfig::default()
        }
    }

    fn frames(cfg: &SystemConfig, seed: u64) -> Vec<OtfsFrame> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..cfg.terminals).map(|k| build_frame(k, cfg, &mut rng).unwrap()).collect()
    }

    fn single(cfg: &SystemConfig, k: usize, doppler: f64, delay: usize) -> ChannelRealization {
        let mut profiles: Vec<_> = (0..cfg.terminals)
            .map(|id| TerminalProfile {
                id,
                active: false,
                gain: C64::new(1.0, 0.0),
                doppler: 0.0,
                delay: 0,
                elevation: 0.0,
                azimuth: 0.0,
                steering: vec![C64::new(1.0, 0.0); cfg.antennas()],
            })
            .collect();
        profiles[k] = TerminalProfile {
            id: k,
            active: true,
            gain: C64::new(0.3, 0.9),
            doppler,
            delay,
            elevation: 0.5,
            azimuth: 0.2,
            steering: steering_vector(cfg.upa_x, cfg.upa_y, 0.5, 0.2),
        };
        ChannelRealization {
            profiles,
            active_set: vec![k],
        }
    }

    #[test]
    fn silent_channel_is_zero() {
        let cfg = SystemConfig {
            active_terminals: 0,
            ..small_cfg()
        };
        let real = draw_realization(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rx = propagate(&frames(&cfg, 0), &real, &cfg, &mut rng).unwrap();
        assert_eq!(rx.noise_var, 0.0);
        assert!(rx.antennas.iter().flatten().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn identity_channel_passes_frame_through() {
        let cfg = SystemConfig {
            upa_x: 1,
            upa_y: 1,
            ..small_cfg()
        };
        let mut real = single(&cfg, 1, 0.0, 0);
        real.profiles[1].gain = C64::new(1.0, 0.0);
        let fr = frames(&cfg, 4);
        let rx = synthesize(&fr, &real, &cfg).unwrap();
        assert_eq!(rx.antennas[0], fr[1].time_signal);
    }

    #[test]
    fn matches_brute_force_double_sum() {
        let cfg = small_cfg();
        let real = single(&cfg, 3, 1.7, 5);
        let fr = frames(&cfg, 5);
        let rx = synthesize(&fr, &real, &cfg).unwrap();
        for p in 0..cfg.antennas() {
            for kappa in 0..cfg.frame_len() {
                let mut want = C64::new(0.0, 0.0);
                for prof in &real.profiles {
                    if !prof.active {
                        continue;
                    }
                    for l in 0..cfg.delay_span {
                        if kappa >= l {
                            want += cir(prof, p, kappa, l, &cfg) * fr[prof.id].time_signal[kappa - l];
                        }
                    }
                }
                assert!((rx.sample(kappa, p) - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn static_channel_is_plain_convolution() {
        let cfg = small_cfg();
        let real = single(&cfg, 0, 0.0, 4);
        let fr = frames(&cfg, 6);
        let rx = synthesize(&fr, &real, &cfg).unwrap();
        let s = &fr[0].time_signal;
        for p in 0..cfg.antennas() {
            let g = real.profiles[0].effective_gain(p);
            for kappa in 0..cfg.frame_len() {
                let want = if kappa >= 4 { g * s[kappa - 4] } else { C64::new(0.0, 0.0) };
                assert!((rx.sample(kappa, p) - want).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn superposition_is_linear() {
        let cfg = small_cfg();
        let fr = frames(&cfg, 7);
        let mut both = draw_realization(&cfg, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let (a, b) = (both.active_set[0], both.active_set[1]);
        let mut only_a = both.clone();
        only_a.profiles[b].active = false;
        only_a.active_set = vec![a];
        let mut only_b = both.clone();
        only_b.profiles[a].active = false;
        only_b.active_set = vec![b];
        both.active_set.sort_unstable();
        let r = synthesize(&fr, &both, &cfg).unwrap();
        let ra = synthesize(&fr, &only_a, &cfg).unwrap();
        let rb = synthesize(&fr, &only_b, &cfg).unwrap();
        for p in 0..cfg.antennas() {
            for k in 0..cfg.frame_len() {
                assert!((r.sample(k, p) - ra.sample(k, p) - rb.sample(k, p)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_calibration() {
        let cfg = SystemConfig {
            upa_x: 1,
            upa_y: 1,
            snr_db: 0.0,
            ..SystemConfig::default()
        };
        let mut real = single(&cfg, 2, 0.0, 0);
        real.profiles[2].gain = C64::new(1.0, 0.0);
        let fr: Vec<_> = {
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            (0..cfg.terminals).map(|k| build_frame(k, &cfg, &mut rng).unwrap()).collect()
        };
        let clean = synthesize(&fr, &real, &cfg).unwrap();
        let p_sig = clean.mean_power();
        assert!((p_sig - 1.0).abs() < 0.05);
        assert_eq!(calibrate_noise(&cfg, &real, &clean).unwrap(), p_sig);
        let cfg20 = SystemConfig { snr_db: 20.0, ..cfg.clone() };
        assert!((calibrate_noise(&cfg20, &real, &clean).unwrap() - 0.01 * p_sig).abs() < 1e-15);
        let cfg_inf = SystemConfig { snr_db: f64::INFINITY, ..cfg.clone() };
        assert_eq!(calibrate_noise(&cfg_inf, &real, &clean).unwrap(), 0.0);

        let empty = ChannelRealization {
            profiles: real.profiles.iter().cloned().map(|mut p| { p.active = false; p }).collect(),
            active_set: vec![],
        };
        assert!(matches!(calibrate_noise(&cfg, &empty, &RxFrame::zeros(&cfg)), Err(Error::NoActiveTerminals)));
    }

    #[test]
    fn empirical_noise_variance_matches() {
        // 2560 samples x 100 antennas > 1e5 draws.
        let cfg = SystemConfig::default();
        let mut rx = RxFrame::zeros(&cfg);
        add_noise(&mut rx, 0.37, 42);
        assert!((rx.mean_power() / 0.37 - 1.0).abs() < 0.03);
        let mut again = RxFrame::zeros(&cfg);
        add_noise(&mut again, 0.37, 42);
        assert_eq!(rx, again);
    }

    #[test]
    fn rejects_wrong_frame_count() {
        let cfg = small_cfg();
        let real = draw_realization(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let fr = frames(&cfg, 0);
        assert!(matches!(synthesize(&fr[..3], &real, &cfg), Err(Error::DimensionMismatch { .. })));
    }
}
