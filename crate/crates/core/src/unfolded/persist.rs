use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelKind, ChannelSpec, LinkScenario, PilotScheme};

use super::{ParamMode, UnfoldedParams};

/// Value of the `format` key written by [`save_params`].
pub const PARAMS_FORMAT: &str = "jed-u-admm-params/1";

/// Link setup the parameters were trained for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioMeta {
    pub n_rx: usize,
    pub n_tx: usize,
    pub t_pilot: usize,
    pub t_data: usize,
    pub channel: ChannelKind,
    pub rho_c: f64,
    pub sigma_h_sq: f64,
    pub pilot_scheme: PilotScheme,
    pub beta: u32,
    pub snr_db: f64,
}

impl ScenarioMeta {
    pub fn new(scenario: &LinkScenario, snr_db: f64) -> Self {
        Self {
            n_rx: scenario.channel.n_rx,
            n_tx: scenario.channel.n_tx,
            t_pilot: scenario.t_pilot,
            t_data: scenario.t_data,
            channel: scenario.channel.kind,
            rho_c: scenario.channel.rho_c,
            sigma_h_sq: scenario.channel.sigma_h_sq,
            pilot_scheme: scenario.pilot_scheme,
            beta: scenario.beta,
            snr_db,
        }
    }

    pub fn link_scenario(&self) -> LinkScenario {
        LinkScenario {
            channel: ChannelSpec {
                n_rx: self.n_rx,
                n_tx: self.n_tx,
                kind: self.channel,
                sigma_h_sq: self.sigma_h_sq,
                rho_c: self.rho_c,
            },
            t_pilot: self.t_pilot,
            t_data: self.t_data,
            pilot_scheme: self.pilot_scheme,
            beta: self.beta,
        }
    }
}

/// Frozen network parameters plus the run that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedParams {
    pub params: UnfoldedParams,
    pub scenario: ScenarioMeta,
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    format: String,
    mode: ParamMode,
    layers: usize,
    rho: Vec<f64>,
    theta: Vec<f64>,
    alpha: Vec<f64>,
    gamma: Vec<f64>,
    gamma0: f64,
    #[serde(with = "seed_repr")]
    seed: u64,
    epochs: usize,
    learning_rate: f64,
    scenario: ScenarioMeta,
}

// TOML integers are signed 64-bit; larger seeds are written as strings.
mod seed_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => Repr::Int(v),
            Err(_) => Repr::Text(seed.to_string()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => u64::try_from(v).map_err(serde::de::Error::custom),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

pub fn params_to_string(trained: &TrainedParams) -> Result<String> {
    trained.params.validate()?;
    let p = &trained.params;
    let file = ParamsFile {
        format: PARAMS_FORMAT.to_string(),
        mode: p.mode,
        layers: p.layers,
        rho: p.rho.clone(),
        theta: p.theta.clone(),
        alpha: p.alpha.clone(),
        gamma: p.gamma.clone(),
        gamma0: p.gamma0,
        seed: trained.seed,
        epochs: trained.epochs,
        learning_rate: trained.learning_rate,
        scenario: trained.scenario,
    };
    toml::to_string(&file).map_err(|e| Error::InvalidArgument(format!("cannot serialize parameters: {e}")))
}

pub fn params_from_str(text: &str, origin: &str) -> Result<TrainedParams> {
    let parse_err = |message: String| Error::Parse {
        origin: origin.to_string(),
        message,
    };
    let file: ParamsFile = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    if file.format != PARAMS_FORMAT {
        return Err(parse_err(format!(
            "unsupported format {:?}, expected {PARAMS_FORMAT:?}",
            file.format
        )));
    }
    let params = UnfoldedParams {
        mode: file.mode,
        layers: file.layers,
        rho: file.rho,
        theta: file.theta,
        alpha: file.alpha,
        gamma: file.gamma,
        gamma0: file.gamma0,
    };
    params.validate().map_err(|e| parse_err(e.to_string()))?;
    Ok(TrainedParams {
        params,
        scenario: file.scenario,
        seed: file.seed,
        epochs: file.epochs,
        learning_rate: file.learning_rate,
    })
}

pub fn save_params(path: impl AsRef<Path>, trained: &TrainedParams) -> Result<()> {
    let path = path.as_ref();
    let text = params_to_string(trained)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<TrainedParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    params_from_str(&text, &path.display().to_string())
}
