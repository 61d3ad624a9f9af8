//! Desk-scale versions of the eight reference experiments.
//!
//! All presets use 4-QAM, `T_t = K` DFT pilots, `T_d = 512` and
//! [`DEFAULT_TRIALS`](super::DEFAULT_TRIALS) realizations per point.

use crate::error::{Error, Result};
use crate::model::{ChannelSpec, LinkScenario};
use crate::unfolded::ParamMode;

use super::{Algorithm, ExperimentConfig, Penalty, TrainingSpec, UnfoldedSource};

pub const PRESET_NAMES: [&str; 8] = ["exp1", "exp2", "exp3", "exp4", "exp5", "exp6", "exp7", "exp8"];

const T_DATA: usize = 512;

fn link(n: usize, k: usize) -> LinkScenario {
    LinkScenario::iid(n, k, T_DATA)
}

fn grid(lo: i32, hi: i32, step: usize) -> Vec<f64> {
    (lo..=hi).step_by(step).map(f64::from).collect()
}

fn cfg(name: &str, scenario: LinkScenario, algorithm: Algorithm, iterations: usize, snr: &[f64]) -> ExperimentConfig {
    ExperimentConfig::new(name, scenario, algorithm, iterations, snr.to_vec())
}

fn unfolded(name: &str, scenario: LinkScenario, layers: usize, mode: ParamMode, train_snr: f64, snr: &[f64]) -> ExperimentConfig {
    let mut c = cfg(name, scenario, Algorithm::JedUAdmm, layers, snr);
    c.unfolded = UnfoldedSource::Train(TrainingSpec::new(mode, train_snr));
    c
}

/// Configurations of preset `name` (`exp1` to `exp8`).
pub fn preset(name: &str) -> Result<Vec<ExperimentConfig>> {
    let g = grid(8, 24, 4);
    let mut out = Vec::new();
    match name {
        // penalty at one and four times the noise ratio
        "exp1" => {
            for (n, k, l) in [(32, 32, 20), (32, 16, 100), (64, 80, 20)] {
                for scale in [1.0, 4.0] {
                    let mut c = cfg(name, link(n, k), Algorithm::JedAdmm, l, &g);
                    c.penalty = Penalty::NoiseRatio(scale);
                    out.push(c);
                }
            }
        }
        // iteration budget, AM against ADMM at rho = 4 sigma_v^2 / sigma_h^2
        "exp2" => {
            for (n, k) in [(16, 16), (32, 32)] {
                for alg in [Algorithm::JedAm, Algorithm::JedAdmm] {
                    for l in [10, 20, 50] {
                        let mut c = cfg(name, link(n, k), alg, l, &grid(8, 20, 4));
                        c.penalty = Penalty::NoiseRatio(4.0);
                        out.push(c);
                    }
                }
            }
        }
        // receiver correlation
        "exp3" => {
            for (n, k) in [(16, 16), (32, 32)] {
                for rho_c in [0.5, 0.9] {
                    let mut s = link(n, k);
                    s.channel = ChannelSpec::kronecker(n, k, rho_c);
                    for (alg, l) in [(Algorithm::JedAm, 50), (Algorithm::JedAdmm, 20)] {
                        out.push(cfg(name, s, alg, l, &g));
                    }
                }
            }
        }
        // shared against per-layer parameters
        "exp4" => {
            let g = grid(8, 20, 4);
            for mode in [ParamMode::Shared, ParamMode::Unshared] {
                out.push(unfolded(name, link(16, 16), 10, mode, 16.0, &g));
            }
            out.push(cfg(name, link(16, 16), Algorithm::JedAdmm, 10, &g));
        }
        // network depth
        "exp5" => {
            let g = grid(8, 20, 4);
            for l in [5, 10, 15, 20] {
                out.push(unfolded(name, link(16, 16), l, ParamMode::Shared, 16.0, &g));
            }
            out.push(cfg(name, link(16, 16), Algorithm::JedAdmm, 20, &g));
        }
        // unfolded against iterative, square systems
        "exp6" => {
            for (n, k) in [(16, 16), (32, 32)] {
                out.push(unfolded(name, link(n, k), 10, ParamMode::Shared, 16.0, &g));
                out.push(cfg(name, link(n, k), Algorithm::JedAdmm, 20, &g));
                out.push(cfg(name, link(n, k), Algorithm::JedAm, 20, &g));
            }
        }
        // tall and overloaded systems
        "exp7" => {
            for (n, k, train_snr) in [(32, 16, 12.0), (64, 80, 20.0)] {
                out.push(unfolded(name, link(n, k), 10, ParamMode::Shared, train_snr, &g));
                out.push(cfg(name, link(n, k), Algorithm::JedAdmm, 20, &g));
                out.push(cfg(name, link(n, k), Algorithm::JedAm, 20, &g));
            }
        }
        // receive antennas at fixed K = 16
        "exp8" => {
            let g = grid(12, 20, 4);
            for n in [8, 16, 32, 48, 64] {
                out.push(cfg(name, link(n, 16), Algorithm::JedAdmm, 20, &g));
                out.push(cfg(name, link(n, 16), Algorithm::JedAm, 20, &g));
                out.push(cfg(name, link(n, 16), Algorithm::Mmse, 1, &g));
            }
        }
        _ => {
            return Err(Error::Usage(format!(
                "unknown preset {name:?}; expected one of {}",
                PRESET_NAMES.join(", ")
            )))
        }
    }
    Ok(out)
}
