//! Key-value experiment files: one `key = value` per line, `#` comments.
//!
//! ```text
//! experiment = "exp1-custom"
//! n_rx = 32
//! n_tx = 32
//! t_data = 512
//! snr_grid_db = [8, 12, 16, 20]
//! algorithm = "jed_admm"
//! iterations = 20
//! rho_scale = 4      # rho = 4 sigma_v^2 / sigma_h^2
//! trials = 2000
//! seed = 1
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{ChannelKind, ChannelSpec, LinkScenario, PilotScheme};
use crate::unfolded::ParamMode;

use super::{Algorithm, ExperimentConfig, Penalty, TrainingSpec, UnfoldedSource, DEFAULT_TRIALS};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<String>,
    n_rx: usize,
    n_tx: usize,
    t_pilot: Option<usize>,
    t_data: usize,
    snr_grid_db: Vec<f64>,
    channel: Option<ChannelKind>,
    rho_c: Option<f64>,
    sigma_h_sq: Option<f64>,
    pilot_scheme: Option<PilotScheme>,
    beta: Option<u32>,
    algorithm: Algorithm,
    iterations: Option<usize>,
    rho: Option<f64>,
    rho_scale: Option<f64>,
    unfolded: Option<PathBuf>,
    param_mode: Option<ParamMode>,
    train_snr_db: Option<f64>,
    train_epochs: Option<usize>,
    train_learning_rate: Option<f64>,
    train_batch_size: Option<usize>,
    trials: Option<usize>,
    seed: Option<u64>,
}

/// Reads an experiment file. Relative `unfolded` paths resolve against the
/// file's directory.
pub fn read_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text, &path.display().to_string())?;
    if let UnfoldedSource::File(p) = &mut cfg.unfolded {
        if p.is_relative() {
            if let Some(dir) = path.parent() {
                *p = dir.join(&*p);
            }
        }
    }
    Ok(cfg)
}

/// Parses an experiment description; `origin` names the source in errors.
pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig> {
    let usage = |m: String| Error::Usage(format!("{origin}: {m}"));
    let raw: RawConfig = toml::from_str(text).map_err(|e| usage(e.to_string().trim_end().to_string()))?;

    let kind = raw.channel.unwrap_or(match raw.rho_c {
        Some(r) if r != 0.0 => ChannelKind::Kronecker,
        _ => ChannelKind::IidRayleigh,
    });
    let mut channel = match kind {
        ChannelKind::IidRayleigh => {
            if raw.rho_c.is_some_and(|r| r != 0.0) {
                return Err(usage("rho_c: only meaningful with channel = \"kronecker\"".into()));
            }
            ChannelSpec::iid(raw.n_rx, raw.n_tx)
        }
        ChannelKind::Kronecker => ChannelSpec::kronecker(raw.n_rx, raw.n_tx, raw.rho_c.unwrap_or(0.0)),
    };
    if let Some(s) = raw.sigma_h_sq {
        channel.sigma_h_sq = s;
    }
    if raw.n_rx == 0 || raw.n_tx == 0 {
        return Err(usage("n_rx, n_tx: must be positive".into()));
    }
    let scenario = LinkScenario {
        channel,
        t_pilot: raw.t_pilot.unwrap_or(raw.n_tx),
        t_data: raw.t_data,
        pilot_scheme: raw.pilot_scheme.unwrap_or(PilotScheme::Dft),
        beta: raw.beta.unwrap_or(4),
    };
    if scenario.t_pilot < raw.n_tx {
        return Err(usage(format!("t_pilot: need at least n_tx = {} pilot slots", raw.n_tx)));
    }

    let penalty = match (raw.rho, raw.rho_scale) {
        (Some(_), Some(_)) => return Err(usage("rho, rho_scale: give at most one".into())),
        (Some(r), None) => Penalty::Fixed(r),
        (None, Some(s)) => Penalty::NoiseRatio(s),
        (None, None) => Penalty::NoiseRatio(1.0),
    };
    let iterations = match raw.iterations {
        Some(l) => l,
        None if raw.algorithm.is_iterative() => return Err(usage(format!("missing field `iterations` for {}", raw.algorithm))),
        None => 1,
    };

    let mode = raw.param_mode.unwrap_or(ParamMode::Shared);
    let unfolded = if let Some(p) = raw.unfolded {
        UnfoldedSource::File(p)
    } else if let Some(snr) = raw.train_snr_db {
        let mut t = TrainingSpec::new(mode, snr);
        t.epochs = raw.train_epochs.unwrap_or(t.epochs);
        t.learning_rate = raw.train_learning_rate.unwrap_or(t.learning_rate);
        t.batch_size = raw.train_batch_size.unwrap_or(t.batch_size);
        UnfoldedSource::Train(t)
    } else {
        UnfoldedSource::Untrained(mode)
    };

    let cfg = ExperimentConfig {
        experiment: raw.experiment.unwrap_or_else(|| "custom".into()),
        scenario,
        snr_grid_db: raw.snr_grid_db,
        algorithm: raw.algorithm,
        iterations,
        penalty,
        unfolded,
        trials: raw.trials.unwrap_or(DEFAULT_TRIALS),
        seed: raw.seed.unwrap_or(1),
    };
    cfg.validate().map_err(|e| match e {
        Error::Usage(m) => usage(m),
        other => usage(other.to_string()),
    })?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "n_rx = 8\nn_tx = 4\nt_data = 64\nsnr_grid_db = [0, 10.5]\nalgorithm = \"jed_admm\"\niterations = 7\n";

    #[test]
    fn defaults() {
        let c = parse_config(BASE, "base").unwrap();
        assert_eq!(c.scenario, LinkScenario::iid(8, 4, 64));
        assert_eq!(c.snr_grid_db, vec![0.0, 10.5]);
        assert_eq!(c.iterations, 7);
        assert_eq!(c.penalty, Penalty::NoiseRatio(1.0));
        assert_eq!(c.trials, DEFAULT_TRIALS);
    }

    #[test]
    fn comments_and_optional_fields() {
        let text = format!(
            "# correlated link\n{BASE}rho_c = 0.5  # receiver correlation\nrho = 0.02\npilot_scheme = \"one_hot\"\nt_pilot = 6\nseed = 9\ntrials = 3\n"
        );
        let c = parse_config(&text, "x").unwrap();
        assert_eq!(c.scenario.channel.kind, ChannelKind::Kronecker);
        assert_eq!(c.scenario.channel.rho_c, 0.5);
        assert_eq!(c.scenario.t_pilot, 6);
        assert_eq!(c.scenario.pilot_scheme, PilotScheme::OneHot);
        assert_eq!(c.penalty, Penalty::Fixed(0.02));
        assert_eq!((c.trials, c.seed), (3, 9));
    }

    #[test]
    fn training_fields() {
        let text = BASE.replace("jed_admm", "jed_u_admm")
            + "param_mode = \"unshared\"\ntrain_snr_db = 16\ntrain_epochs = 4\n";
        let c = parse_config(&text, "x").unwrap();
        match c.unfolded {
            UnfoldedSource::Train(t) => {
                assert_eq!(t.mode, ParamMode::Unshared);
                assert_eq!((t.snr_db, t.epochs, t.batch_size), (16.0, 4, 32));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_name_the_field() {
        let cases = [
            (BASE.replace("n_rx = 8\n", ""), "n_rx"),
            (BASE.replace("iterations = 7\n", ""), "iterations"),
            (BASE.replace("t_data = 64", "t_data = \"many\""), "t_data"),
            (BASE.replace("jed_admm", "magic"), "algorithm"),
            (format!("{BASE}trials = 0\n"), "trials"),
            (format!("{BASE}colour = 3\n"), "colour"),
            (format!("{BASE}rho = 1\nrho_scale = 2\n"), "rho"),
            (format!("{BASE}t_pilot = 2\n"), "t_pilot"),
            (BASE.replace("[0, 10.5]", "[]"), "snr_grid_db"),
        ];
        for (text, field) in cases {
            let err = parse_config(&text, "cfg.toml").unwrap_err().to_string();
            assert!(err.contains(field), "{field}: {err}");
            assert!(err.contains("cfg.toml"), "{err}");
        }
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_config("/no/such/dir/missing.cfg").unwrap_err().to_string();
        assert!(err.contains("/no/such/dir/missing.cfg"), "{err}");
    }

    #[test]
    fn relative_params_path_resolves_next_to_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        let text = BASE.replace("jed_admm", "jed_u_admm") + "unfolded = \"p.toml\"\n";
        std::fs::write(&path, text).unwrap();
        let c = read_config(&path).unwrap();
        assert_eq!(c.unfolded, UnfoldedSource::File(dir.path().join("p.toml")));
    }
}
