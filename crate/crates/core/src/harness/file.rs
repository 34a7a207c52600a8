use std::path::Path;

use serde::Deserialize;

use super::sweep::SweepSpec;
use crate::config::SystemConfig;
use crate::detector::{ReceiverOptions, StoppingRule, DEFAULT_EPSILON, DEFAULT_PRUNE_Z, DEFAULT_REFINEMENT_PASSES};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepTable {
    snr_db: Vec<f64>,
    trials: usize,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReceiverTable {
    /// Fixed sparsity instead of the residual threshold.
    sparsity: Option<usize>,
    epsilon: Option<f64>,
    refinement_passes: Option<usize>,
    /// `false` keeps every path returned by the pursuit.
    prune: Option<bool>,
    prune_z: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentTable {
    system: SystemConfig,
    sweep: SweepTable,
    #[serde(default)]
    receiver: ReceiverTable,
}

/// Parses an experiment description:
///
/// ```toml
/// [system]
/// M = 256
/// # ... every SystemConfig field; rng_seed and ts_seed default to 0
///
/// [sweep]
/// snr_db = [0, 5, 10]
/// trials = 200
///
/// [receiver]          # optional
/// epsilon = 0.1
/// refinement_passes = 2
/// prune_z = 6.0
/// ```
pub fn parse_experiment(text: &str) -> Result<SweepSpec> {
    let table: ExperimentTable = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let stop = match (table.receiver.sparsity, table.receiver.epsilon) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidConfig("receiver: give either sparsity or epsilon".into()));
        }
        (Some(s), None) => StoppingRule::FixedSparsity(s),
        (None, eps) => StoppingRule::ResidualThreshold {
            epsilon: eps.unwrap_or(DEFAULT_EPSILON),
        },
    };
    let spec = SweepSpec {
        base: table.system,
        snr_db: table.sweep.snr_db,
        trials: table.sweep.trials,
        receiver: ReceiverOptions {
            stop,
            refinement_passes: table.receiver.refinement_passes.unwrap_or(DEFAULT_REFINEMENT_PASSES),
            prune_z: match table.receiver.prune {
                Some(false) => None,
                _ => Some(table.receiver.prune_z.unwrap_or(DEFAULT_PRUNE_Z)),
            },
        },
    };
    spec.validate()?;
    Ok(spec)
}

pub fn load_experiment(path: &Path) -> Result<SweepSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    parse_experiment(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
[system]
M = 256
N = 8
M_t = 64
L = 33
K = 100
K_a = 10
P_x = 10
P_y = 10
carrier_freq = 10e9
bandwidth = 122.88e6
max_doppler_hz = 178.2e3
max_terminal_speed = 100.0
snr_db = 20.0

[sweep]
snr_db = [0.0, 10.0]
trials = 3
"#;

    #[test]
    fn parses_full_file_with_defaults() {
        let spec = parse_experiment(FULL).unwrap();
        assert_eq!(spec.base, SystemConfig::default());
        assert_eq!(spec.snr_db, vec![0.0, 10.0]);
        assert_eq!(spec.trials, 3);
        assert_eq!(spec.receiver, ReceiverOptions::default());
    }

    #[test]
    fn missing_field_is_config_error() {
        let text = FULL.replace("K_a = 10\n", "");
        assert!(matches!(parse_experiment(&text), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn missing_sweep_is_config_error() {
        let text = FULL.split("[sweep]").next().unwrap();
        assert!(matches!(parse_experiment(text), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn unknown_key_rejected() {
        let text = FULL.replace("[sweep]", "bogus = 1\n[sweep]");
        assert!(parse_experiment(&text).is_err());
    }

    #[test]
    fn receiver_table() {
        let text = format!("{FULL}\n[receiver]\nsparsity = 10\nrefinement_passes = 0\n");
        let spec = parse_experiment(&text).unwrap();
        assert_eq!(spec.receiver.stop, StoppingRule::FixedSparsity(10));
        assert_eq!(spec.receiver.refinement_passes, 0);
        let both = format!("{FULL}\n[receiver]\nsparsity = 10\nepsilon = 0.2\n");
        assert!(parse_experiment(&both).is_err());
    }

    #[test]
    fn invalid_dimensions_rejected() {
        let text = FULL.replace("L = 33", "L = 64");
        assert!(matches!(parse_experiment(&text), Err(Error::InvalidConfig(_))));
    }
}
