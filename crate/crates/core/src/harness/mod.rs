//! Monte-Carlo BER sweeps.
//!
//! Every trial draws its channel, symbols and noise from a stream seeded by
//! `(seed, trial index)`. The same stream is reused at every SNR point, and
//! per-trial results are reduced in trial order, so a sweep's output depends
//! only on its configuration and seed, never on the number of worker threads.

mod config_file;
mod presets;
mod report;
mod selftest;

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{
    flops_estimate, jed_admm, jed_am, linear_detector_flops, mmse_detect, zf_detect, AdmmConfig, FlopsAlgorithm,
    FlopsReport,
};
use crate::error::{Error, Result};
use crate::linalg::ComplexMat;
use crate::model::{Constellation, LinkScenario};
use crate::seeding::derive_seed;
use crate::unfolded::{infer_complex, load_params, train, ParamMode, TrainConfig, UnfoldedParams, ZUpdate};

pub use config_file::{parse_config, read_config};
pub use presets::{preset, PRESET_NAMES};
pub use report::{emit_csv, emit_plot, read_csv, to_records, CsvRecord, CSV_HEADER};
pub use selftest::{run_selftest, CheckResult};

/// Environment variable that overrides the default worker count.
pub const THREADS_ENV: &str = "MIMO_JED_THREADS";

/// Default number of channel realizations per SNR point.
pub const DEFAULT_TRIALS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    JedAm,
    JedAdmm,
    JedUAdmm,
    /// Zero forcing with the true channel.
    Zf,
    /// Linear MMSE with the true channel.
    Mmse,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::JedAm => "jed_am",
            Algorithm::JedAdmm => "jed_admm",
            Algorithm::JedUAdmm => "jed_u_admm",
            Algorithm::Zf => "zf",
            Algorithm::Mmse => "mmse",
        }
    }

    pub fn is_iterative(self) -> bool {
        matches!(self, Algorithm::JedAm | Algorithm::JedAdmm | Algorithm::JedUAdmm)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Algorithm::JedAm,
            Algorithm::JedAdmm,
            Algorithm::JedUAdmm,
            Algorithm::Zf,
            Algorithm::Mmse,
        ]
        .into_iter()
        .find(|a| a.name() == s)
        .ok_or_else(|| Error::Usage(format!("unknown algorithm {s:?}")))
    }
}

/// ADMM penalty, either fixed or tied to the noise level of each SNR point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Fixed(f64),
    /// Multiple of `sigma_v^2 / sigma_h^2`.
    NoiseRatio(f64),
}

impl Penalty {
    pub fn resolve(self, noise_ratio: f64) -> f64 {
        match self {
            Penalty::Fixed(rho) => rho,
            Penalty::NoiseRatio(scale) => scale * noise_ratio,
        }
    }
}

/// Training run used when no trained parameter file is given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSpec {
    pub mode: ParamMode,
    pub snr_db: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl TrainingSpec {
    pub fn new(mode: ParamMode, snr_db: f64) -> Self {
        Self {
            mode,
            snr_db,
            epochs: 100,
            learning_rate: 0.025,
            batch_size: 32,
        }
    }
}

/// Where JED-U-ADMM takes its parameters from.
#[derive(Debug, Clone, PartialEq)]
pub enum UnfoldedSource {
    File(PathBuf),
    /// Train before sweeping, seeded from the experiment seed.
    Train(TrainingSpec),
    /// JED-ADMM-like starting point at each SNR point's noise level.
    Untrained(ParamMode),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Label written to the `experiment` column.
    pub experiment: String,
    pub scenario: LinkScenario,
    pub snr_grid_db: Vec<f64>,
    pub algorithm: Algorithm,
    /// Iterations, or layers for JED-U-ADMM. Ignored by linear detectors.
    pub iterations: usize,
    pub penalty: Penalty,
    pub unfolded: UnfoldedSource,
    pub trials: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    /// 4-QAM over an i.i.d. channel with `T_t = K`, penalty equal to the
    /// noise ratio and [`DEFAULT_TRIALS`] trials.
    pub fn new(
        experiment: impl Into<String>,
        scenario: LinkScenario,
        algorithm: Algorithm,
        iterations: usize,
        snr_grid_db: Vec<f64>,
    ) -> Self {
        Self {
            experiment: experiment.into(),
            scenario,
            snr_grid_db,
            algorithm,
            iterations,
            penalty: Penalty::NoiseRatio(1.0),
            unfolded: UnfoldedSource::Untrained(ParamMode::Shared),
            trials: DEFAULT_TRIALS,
            seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let usage = |m: String| Err(Error::Usage(m));
        if self.trials == 0 {
            return usage("trials: must be at least 1".into());
        }
        if self.snr_grid_db.is_empty() {
            return usage("snr_grid_db: must not be empty".into());
        }
        if let Some(s) = self.snr_grid_db.iter().find(|s| s.is_nan()) {
            return usage(format!("snr_grid_db: invalid value {s}"));
        }
        if self.algorithm.is_iterative() && self.iterations == 0 {
            return usage("iterations: must be at least 1".into());
        }
        match self.penalty {
            Penalty::Fixed(r) | Penalty::NoiseRatio(r) if !(r > 0.0 && r.is_finite()) => {
                return usage(format!("rho: must be positive, got {r}"));
            }
            _ => {}
        }
        if self.algorithm == Algorithm::JedUAdmm && self.scenario.beta != 4 {
            return usage("beta: jed_u_admm supports 4-QAM only".into());
        }
        if let UnfoldedSource::Train(t) = &self.unfolded {
            if t.epochs == 0 || t.batch_size == 0 || !(t.learning_rate >= 0.0) || t.snr_db.is_nan() {
                return usage("train: epochs and batch size must be positive".into());
            }
        }
        Ok(())
    }

    /// Legend label: algorithm plus the knobs that distinguish series.
    pub fn series_label(&self) -> String {
        let ch = &self.scenario.channel;
        let mut s = format!("{} {}x{}", self.algorithm, ch.n_rx, ch.n_tx);
        if self.algorithm.is_iterative() {
            s.push_str(&format!(" L={}", self.iterations));
        }
        if self.algorithm == Algorithm::JedAdmm {
            match self.penalty {
                Penalty::Fixed(r) => s.push_str(&format!(" rho={r}")),
                Penalty::NoiseRatio(k) => s.push_str(&format!(" rho={k}r")),
            }
        }
        if self.algorithm == Algorithm::JedUAdmm {
            match &self.unfolded {
                UnfoldedSource::File(_) => s.push_str(" trained"),
                UnfoldedSource::Train(t) => s.push_str(&format!(" {:?}", t.mode).to_lowercase()),
                UnfoldedSource::Untrained(_) => s.push_str(" untrained"),
            }
        }
        if self.scenario.channel.rho_c != 0.0 {
            s.push_str(&format!(" rho_c={}", ch.rho_c));
        }
        s
    }

    pub fn flops(&self) -> FlopsReport {
        let ch = &self.scenario.channel;
        let (n, k) = (ch.n_rx as u64, ch.n_tx as u64);
        let (tt, td, l) = (self.scenario.t_pilot as u64, self.scenario.t_data as u64, self.iterations as u64);
        match self.algorithm {
            Algorithm::JedAm => flops_estimate(FlopsAlgorithm::JedAm, n, k, tt, td, l),
            Algorithm::JedAdmm | Algorithm::JedUAdmm => flops_estimate(FlopsAlgorithm::JedAdmm, n, k, tt, td, l),
            Algorithm::Zf | Algorithm::Mmse => linear_detector_flops(n, k, td),
        }
    }
}

/// Aggregated errors at one SNR point.
#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub snr_db: f64,
    pub bit_errors: u64,
    /// Bits over successful trials only; zero when every trial failed.
    pub bits_total: u64,
    /// `NaN` when every trial failed.
    pub ber: f64,
    /// Binomial standard error `sqrt(ber (1 - ber) / bits_total)`.
    pub stderr: f64,
    pub flops: FlopsReport,
    pub trials: usize,
    pub trials_failed: usize,
    /// Penalty used by JED-ADMM at this point.
    pub rho: Option<f64>,
}

impl BerPoint {
    fn from_counts(snr_db: f64, bit_errors: u64, bits_total: u64, trials: usize, trials_failed: usize) -> Self {
        let (ber, stderr) = if bits_total == 0 {
            (f64::NAN, f64::NAN)
        } else {
            let p = bit_errors as f64 / bits_total as f64;
            (p, (p * (1.0 - p) / bits_total as f64).sqrt())
        };
        Self {
            snr_db,
            bit_errors,
            bits_total,
            ber,
            stderr,
            flops: FlopsReport::default(),
            trials,
            trials_failed,
            rho: None,
        }
    }

    pub fn all_failed(&self) -> bool {
        self.trials_failed == self.trials
    }

    /// More than 1% of trials failed.
    pub fn is_flagged(&self) -> bool {
        self.trials_failed * 100 > self.trials
    }

    /// `[ber - 3 stderr, ber + 3 stderr]`.
    pub fn interval(&self, sigmas: f64) -> (f64, f64) {
        (self.ber - sigmas * self.stderr, self.ber + sigmas * self.stderr)
    }
}

/// One configuration and its BER curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub points: Vec<BerPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub bit_errors: u64,
    pub bits: u64,
}

/// Detector with its parameters resolved; cheap to share across threads.
#[derive(Debug, Clone)]
pub struct PreparedDetector {
    algorithm: Algorithm,
    iterations: usize,
    penalty: Penalty,
    unfolded: Option<UnfoldedParams>,
    untrained_mode: ParamMode,
}

/// Resolves the detector's parameters: loads or trains JED-U-ADMM weights.
pub fn prepare_detector(config: &ExperimentConfig) -> Result<PreparedDetector> {
    config.validate()?;
    let mut unfolded = None;
    let mut untrained_mode = ParamMode::Shared;
    if config.algorithm == Algorithm::JedUAdmm {
        match &config.unfolded {
            UnfoldedSource::File(path) => unfolded = Some(load_params(path)?.params),
            UnfoldedSource::Train(spec) => unfolded = Some(train_for(config, spec)?),
            UnfoldedSource::Untrained(mode) => untrained_mode = *mode,
        }
        if let Some(p) = &unfolded {
            if p.layers != config.iterations {
                return Err(Error::Usage(format!(
                    "iterations: {} does not match the {} layers of the trained parameters",
                    config.iterations, p.layers
                )));
            }
        }
    }
    Ok(PreparedDetector {
        algorithm: config.algorithm,
        iterations: config.iterations,
        penalty: config.penalty,
        unfolded,
        untrained_mode,
    })
}

impl PreparedDetector {
    /// Uses `params` for JED-U-ADMM instead of loading or training.
    pub fn with_unfolded(config: &ExperimentConfig, params: UnfoldedParams) -> Result<Self> {
        config.validate()?;
        params.validate()?;
        Ok(Self {
            algorithm: config.algorithm,
            iterations: params.layers,
            penalty: config.penalty,
            unfolded: Some(params),
            untrained_mode: ParamMode::Shared,
        })
    }

    pub fn unfolded_params(&self) -> Option<&UnfoldedParams> {
        self.unfolded.as_ref()
    }

    fn detect(
        &self,
        scenario: &LinkScenario,
        r: &crate::model::Realization,
        snr_db: f64,
        cons: &Constellation,
    ) -> Result<ComplexMat> {
        let ratio = scenario.noise_ratio(snr_db)?;
        match self.algorithm {
            Algorithm::JedAm => Ok(jed_am(&r.y, &r.x_t, ratio, self.iterations, cons)?.x_hat),
            Algorithm::JedAdmm => {
                let cfg = AdmmConfig {
                    rho: self.penalty.resolve(ratio),
                    noise_ratio: ratio,
                    iterations: self.iterations,
                    box_radius: cons.box_radius(),
                };
                Ok(jed_admm(&r.y, &r.x_t, &cfg, cons)?.x_hat)
            }
            Algorithm::JedUAdmm => {
                let fallback;
                let params = match &self.unfolded {
                    Some(p) => p,
                    None => {
                        fallback = UnfoldedParams::admm_like(self.untrained_mode, self.iterations, ratio);
                        &fallback
                    }
                };
                Ok(infer_complex(&r.y, &r.x_t, params, ZUpdate::Tanh, cons)?.0)
            }
            Algorithm::Zf => zf_detect(&r.h, &r.y_data(), cons),
            Algorithm::Mmse => mmse_detect(&r.h, &r.y_data(), r.sigma_v_sq, cons.energy_per_symbol(), cons),
        }
    }
}

/// Training run and JED-ADMM-like starting point for `spec`, seeded from the
/// experiment seed.
pub fn training_setup(config: &ExperimentConfig, spec: &TrainingSpec) -> Result<(TrainConfig, UnfoldedParams)> {
    let ratio = config.scenario.noise_ratio(spec.snr_db)?;
    let init = UnfoldedParams::admm_like(spec.mode, config.iterations, ratio);
    let tc = TrainConfig {
        scenario: config.scenario,
        snr_db: spec.snr_db,
        epochs: spec.epochs,
        learning_rate: spec.learning_rate,
        batch_size: spec.batch_size,
        batches_per_epoch: 1,
        seed: derive_seed(config.seed, 1, 0),
    };
    Ok((tc, init))
}

fn train_for(config: &ExperimentConfig, spec: &TrainingSpec) -> Result<UnfoldedParams> {
    let (tc, init) = training_setup(config, spec)?;
    Ok(train(&tc, &init)?.trained.params)
}

/// Gray-coded bit errors: each axis carries `log2(side)` bits.
pub fn count_bit_errors(x_true: &ComplexMat, x_hat: &ComplexMat, cons: &Constellation) -> Result<u64> {
    if x_true.shape() != x_hat.shape() {
        return Err(Error::Shape(format!(
            "bit count: {:?} vs {:?}",
            x_true.shape(),
            x_hat.shape()
        )));
    }
    let gray = |x: f64| {
        let i = cons.nearest_level(x);
        i ^ (i >> 1)
    };
    Ok(x_true
        .as_slice()
        .iter()
        .zip(x_hat.as_slice())
        .map(|(a, b)| ((gray(a.re) ^ gray(b.re)).count_ones() + (gray(a.im) ^ gray(b.im)).count_ones()) as u64)
        .sum())
}

/// Seed of trial `trial` under master seed `seed`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    derive_seed(seed, 0, trial as u64)
}

/// Draws one realization at `snr_db` from `trial_seed` and counts the
/// detector's bit errors. A detector failure is returned as an error.
pub fn run_trial(
    config: &ExperimentConfig,
    detector: &PreparedDetector,
    snr_db: f64,
    trial_seed: u64,
) -> Result<TrialOutcome> {
    let cons = config.scenario.constellation()?;
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    let r = config.scenario.realize(snr_db, &mut rng)?;
    let x_hat = detector.detect(&config.scenario, &r, snr_db, &cons)?;
    Ok(TrialOutcome {
        bit_errors: count_bit_errors(&r.x_d, &x_hat, &cons)?,
        bits: r.x_d.as_slice().len() as u64 * cons.bits_per_symbol() as u64,
    })
}

/// Runs every SNR point of `config`, resolving the detector first.
pub fn run_ber_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    let detector = prepare_detector(config)?;
    run_ber_sweep_with(config, &detector)
}

/// [`run_ber_sweep`] with an already prepared detector.
///
/// Trials of all SNR points are spread over the current rayon pool; failed
/// trials are counted and left out of the error statistics.
pub fn run_ber_sweep_with(config: &ExperimentConfig, detector: &PreparedDetector) -> Result<SweepResult> {
    config.validate()?;
    let trials = config.trials;
    let jobs = config.snr_grid_db.len() * trials;
    let outcomes: Vec<Option<TrialOutcome>> = (0..jobs)
        .into_par_iter()
        .map(|j| {
            let (p, t) = (j / trials, j % trials);
            run_trial(config, detector, config.snr_grid_db[p], trial_seed(config.seed, t)).ok()
        })
        .collect();

    let flops = config.flops();
    let points = config
        .snr_grid_db
        .iter()
        .zip(outcomes.chunks(trials))
        .map(|(&snr, chunk)| {
            let (mut errors, mut bits, mut failed) = (0u64, 0u64, 0usize);
            for o in chunk {
                match o {
                    Some(o) => {
                        errors += o.bit_errors;
                        bits += o.bits;
                    }
                    None => failed += 1,
                }
            }
            let mut point = BerPoint::from_counts(snr, errors, bits, trials, failed);
            point.flops = flops;
            if config.algorithm == Algorithm::JedAdmm {
                point.rho = config.scenario.noise_ratio(snr).ok().map(|r| config.penalty.resolve(r));
            }
            point
        })
        .collect();
    Ok(SweepResult {
        config: config.clone(),
        points,
    })
}

/// Worker count from [`THREADS_ENV`], if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Error::Usage(format!("{THREADS_ENV}: expected a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool
/// when `threads` is `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("cannot start {n} worker threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
