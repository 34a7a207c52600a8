use serde::{Deserialize, Serialize};

use crate::channel::doppler_phasor;
use crate::config::SystemConfig;
use crate::numerics::C64;

/// One reconstructed tap of a detected terminal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PathWire", from = "PathWire")]
pub struct PathEstimate {
    pub delay: usize,
    /// Cycles per frame.
    pub doppler: f64,
    /// Effective gain `g [v]_p` per antenna.
    pub gains: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct PathWire {
    delay: usize,
    doppler: f64,
    gains_re: Vec<f64>,
    gains_im: Vec<f64>,
}

impl From<PathEstimate> for PathWire {
    fn from(p: PathEstimate) -> Self {
        PathWire {
            delay: p.delay,
            doppler: p.doppler,
            gains_re: p.gains.iter().map(|z| z.re).collect(),
            gains_im: p.gains.iter().map(|z| z.im).collect(),
        }
    }
}

impl From<PathWire> for PathEstimate {
    fn from(w: PathWire) -> Self {
        PathEstimate {
            delay: w.delay,
            doppler: w.doppler,
            gains: w.gains_re.iter().zip(&w.gains_im).map(|(&re, &im)| C64::new(re, im)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminalEstimate {
    pub terminal: usize,
    pub alpha_hat: u8,
    pub paths: Vec<PathEstimate>,
}

/// Receiver output for every potential terminal, indexed by terminal id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelEstimate {
    pub terminals: Vec<TerminalEstimate>,
}

impl ChannelEstimate {
    pub fn empty(terminals: usize) -> Self {
        Self {
            terminals: (0..terminals)
                .map(|terminal| TerminalEstimate {
                    terminal,
                    alpha_hat: 0,
                    paths: Vec::new(),
                })
                .collect(),
        }
    }

    pub fn alpha_hat(&self) -> Vec<u8> {
        self.terminals.iter().map(|t| t.alpha_hat).collect()
    }

    pub fn detected(&self) -> Vec<usize> {
        self.terminals.iter().filter(|t| t.alpha_hat == 1).map(|t| t.terminal).collect()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

/// Reconstructed CIR
/// `h[kappa, l] = sum_q g_q,p exp(j 2 pi v_q (kappa - l_q) / (N (M + M_t))) delta[l - l_q]`.
pub fn reconstruct_cir(
    estimate: &ChannelEstimate,
    k: usize,
    antenna: usize,
    kappa: usize,
    ell: usize,
    cfg: &SystemConfig,
) -> C64 {
    let Some(term) = estimate.terminals.get(k) else {
        return C64::new(0.0, 0.0);
    };
    if term.alpha_hat == 0 {
        return C64::new(0.0, 0.0);
    }
    term.paths
        .iter()
        .filter(|p| p.delay == ell)
        .map(|p| p.gains[antenna] * doppler_phasor(p.doppler, kappa as f64 - p.delay as f64, cfg))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{cir, steering_vector, TerminalProfile};

    fn cfg() -> SystemConfig {
        SystemConfig {
            upa_x: 2,
            upa_y: 2,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn inactive_terminal_is_zero() {
        let est = ChannelEstimate::empty(4);
        assert_eq!(reconstruct_cir(&est, 2, 0, 100, 3, &cfg()), C64::new(0.0, 0.0));
    }

    #[test]
    fn perfect_parameters_match_channel() {
        let cfg = cfg();
        let steering = steering_vector(2, 2, 0.3, 1.0);
        let prof = TerminalProfile {
            id: 1,
            active: true,
            gain: C64::new(-0.4, 1.1),
            doppler: 2.4,
            delay: 7,
            elevation: 0.3,
            azimuth: 1.0,
            steering: steering.clone(),
        };
        let mut est = ChannelEstimate::empty(3);
        est.terminals[1].alpha_hat = 1;
        est.terminals[1].paths.push(PathEstimate {
            delay: 7,
            doppler: 2.4,
            gains: (0..4).map(|p| prof.effective_gain(p)).collect(),
        });
        for kappa in [0, 500, 2559] {
            for ell in [6, 7, 8] {
                for p in 0..4 {
                    let a = reconstruct_cir(&est, 1, p, kappa, ell, &cfg);
                    let b = cir(&prof, p, kappa, ell, &cfg);
                    assert!((a - b).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn multiple_paths_add_term_by_term() {
        let cfg = cfg();
        let mut est = ChannelEstimate::empty(1);
        est.terminals[0].alpha_hat = 1;
        let g1 = vec![C64::new(1.0, 0.5); 4];
        let g2 = vec![C64::new(-0.2, 0.3); 4];
        est.terminals[0].paths.push(PathEstimate { delay: 4, doppler: 1.0, gains: g1.clone() });
        est.terminals[0].paths.push(PathEstimate { delay: 4, doppler: -0.5, gains: g2.clone() });
        let kappa = 1234usize;
        let d = cfg.frame_len() as f64;
        let want = g1[0] * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * 1.0 * (kappa as f64 - 4.0) / d)
            + g2[0] * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * -0.5 * (kappa as f64 - 4.0) / d);
        assert!((reconstruct_cir(&est, 0, 0, kappa, 4, &cfg) - want).norm() < 1e-14);
        assert_eq!(reconstruct_cir(&est, 0, 0, kappa, 5, &cfg), C64::new(0.0, 0.0));
    }

    #[test]
    fn json_layout() {
        let mut est = ChannelEstimate::empty(2);
        est.terminals[1].alpha_hat = 1;
        est.terminals[1].paths.push(PathEstimate {
            delay: 3,
            doppler: 0.25,
            gains: vec![C64::new(1.0, -1.0)],
        });
        let json = est.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v[1]["terminal"], 1);
        assert_eq!(v[1]["alpha_hat"], 1);
        assert_eq!(v[1]["paths"][0]["delay"], 3);
        assert_eq!(v[1]["paths"][0]["gains_im"][0], -1.0);
        assert_eq!(ChannelEstimate::from_json(&json).unwrap(), est);
    }
}
