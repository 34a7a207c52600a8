use crate::channel::{doppler_phasor, ChannelRealization};
use crate::config::SystemConfig;
use crate::detector::ChannelEstimate;
use crate::error::{Error, Result};
use crate::numerics::C64;

/// Activity error rate: mean absolute difference of the indicators.
pub fn aer(alpha_hat: &[u8], alpha: &[u8]) -> Result<f64> {
    if alpha_hat.len() != alpha.len() {
        return Err(Error::dims(alpha.len(), alpha_hat.len()));
    }
    if alpha.is_empty() {
        return Err(Error::UndefinedMetric("AER over zero terminals"));
    }
    let errors = alpha_hat.iter().zip(alpha).filter(|(a, b)| (**a != 0) != (**b != 0)).count();
    Ok(errors as f64 / alpha.len() as f64)
}

/// Normalized squared error of the reconstructed CIR against the truth,
/// summed over every terminal, antenna, frame sample and delay tap.
///
/// Only taps where either CIR is nonzero contribute, so the sum runs over
/// the union of true and estimated delays per terminal.
pub fn nmse(estimate: &ChannelEstimate, truth: &ChannelRealization, cfg: &SystemConfig) -> Result<f64> {
    if truth.active_set.is_empty() {
        return Err(Error::UndefinedMetric("NMSE with no active terminal"));
    }
    if estimate.terminals.len() != truth.profiles.len() {
        return Err(Error::dims(truth.profiles.len(), estimate.terminals.len()));
    }
    let antennas = cfg.antennas();
    let frame = cfg.frame_len();
    let mut num = 0.0;
    let mut den = 0.0;
    let mut est_sum = vec![C64::new(0.0, 0.0); antennas];

    for (term, prof) in estimate.terminals.iter().zip(&truth.profiles) {
        let est_paths: Vec<_> = if term.alpha_hat == 1 { term.paths.iter().collect() } else { Vec::new() };
        let mut taps: Vec<usize> = est_paths.iter().map(|p| p.delay).collect();
        if prof.active {
            taps.push(prof.delay);
        }
        taps.sort_unstable();
        taps.dedup();

        for &ell in &taps {
            let at_tap: Vec<_> = est_paths.iter().filter(|p| p.delay == ell).collect();
            let truth_here = prof.active && prof.delay == ell;
            for kappa in 0..frame {
                let offset = kappa as f64 - ell as f64;
                est_sum.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
                for path in &at_tap {
                    let ph = doppler_phasor(path.doppler, offset, cfg);
                    for (acc, g) in est_sum.iter_mut().zip(&path.gains) {
                        *acc += g * ph;
                    }
                }
                if truth_here {
                    let ph = doppler_phasor(prof.doppler, offset, cfg);
                    for (p, acc) in est_sum.iter().enumerate() {
                        let h = prof.effective_gain(p) * ph;
                        num += (acc - h).norm_sqr();
                        den += h.norm_sqr();
                    }
                } else {
                    num += est_sum.iter().map(|z| z.norm_sqr()).sum::<f64>();
                }
            }
        }
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric("NMSE with zero channel energy"));
    }
    Ok(num / den)
}
