use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::LinkScenario;
use crate::seeding::derive_seed;

use super::persist::{ScenarioMeta, TrainedParams};
use super::{adam_step, grad_params, realify, AdamState, RealKind, UnfoldedParams};

/// Training run description. Every Adam step draws a fresh batch of
/// channels, symbols and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub scenario: LinkScenario,
    pub snr_db: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Channel realizations per Adam step.
    pub batch_size: usize,
    /// Adam steps per epoch.
    pub batches_per_epoch: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(scenario: LinkScenario, snr_db: f64, seed: u64) -> Self {
        Self {
            scenario,
            snr_db,
            epochs: 100,
            learning_rate: 0.025,
            batch_size: 32,
            batches_per_epoch: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.scenario.beta != 4 {
            return Err(Error::InvalidArgument(
                "the tanh auxiliary update assumes 4-QAM symbols".into(),
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.batches_per_epoch == 0 {
            return Err(Error::InvalidArgument(
                "epochs, batch size and batches per epoch must be positive".into(),
            ));
        }
        if !(self.learning_rate >= 0.0) {
            return Err(Error::InvalidArgument("learning rate must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub trained: TrainedParams,
    /// Mean per-realization loss of each epoch.
    pub loss_history: Vec<f64>,
}

/// Trains the scalars of `init` with Adam and returns the frozen result.
///
/// Per-sample gradients may be evaluated in parallel; they are summed in
/// sample order, so the trajectory depends only on the seed.
pub fn train(config: &TrainConfig, init: &UnfoldedParams) -> Result<TrainOutcome> {
    config.validate()?;
    init.validate()?;
    let mut params = init.clone();
    let mut theta = params.to_trainable();
    let mut state = AdamState::new(theta.len());
    let mut history = Vec::with_capacity(config.epochs);
    let mut step: u32 = 0;

    for epoch in 0..config.epochs {
        let mut epoch_loss = 0.0;
        for _ in 0..config.batches_per_epoch {
            step += 1;
            let samples: Vec<Result<(f64, Vec<f64>)>> = (0..config.batch_size)
                .into_par_iter()
                .map(|i| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, step as u64, i as u64));
                    let r = config.scenario.realize(config.snr_db, &mut rng)?;
                    grad_params(
                        &realify(&r.y, RealKind::Signal),
                        &realify(&r.x_t, RealKind::Signal),
                        &realify(&r.x_d, RealKind::Signal),
                        &params,
                    )
                })
                .collect();

            let scale = 1.0 / config.batch_size as f64;
            let mut grad = vec![0.0; theta.len()];
            let mut batch_loss = 0.0;
            for sample in samples {
                let (l, g) = sample.map_err(|e| match e {
                    Error::NumericalFailure { .. } => Error::TrainingDivergence {
                        epoch: epoch + 1,
                        loss: f64::NAN,
                    },
                    other => other,
                })?;
                batch_loss += l * scale;
                for (acc, gi) in grad.iter_mut().zip(g) {
                    *acc += gi * scale;
                }
            }
            if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDivergence {
                    epoch: epoch + 1,
                    loss: batch_loss,
                });
            }
            epoch_loss += batch_loss / config.batches_per_epoch as f64;
            adam_step(&mut theta, &grad, &mut state, config.learning_rate, step);
            params.set_trainable(&theta)?;
        }
        history.push(epoch_loss);
    }

    Ok(TrainOutcome {
        trained: TrainedParams {
            params,
            scenario: ScenarioMeta::new(&config.scenario, config.snr_db),
            seed: config.seed,
            epochs: config.epochs,
            learning_rate: config.learning_rate,
        },
        loss_history: history,
    })
}
