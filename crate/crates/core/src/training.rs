//! Mini-batch Adam training with dev-set early stopping.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor_core::{adam_step, AdamConfig, Mode, OptimizerState, ParameterSet, Precision, Tape, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 8,
            adam: AdamConfig::default(),
            patience: 3,
            seed: 0,
            precision: Precision::F32,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-instance training loss (train mode).
    pub train_loss: f64,
    /// Dev score, higher is better.
    pub dev_score: Option<f64>,
    pub skipped_updates: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

/// Trains `params` on `items`. `loss` builds one instance's loss on a shared
/// per-batch tape; the batch gradient is the mean over instances.
///
/// When `dev_score` returns a value, the best-scoring parameters are kept
/// and training stops after `patience` epochs without improvement.
pub fn fit<I, L, D>(
    params: &mut ParameterSet,
    items: &[I],
    config: &TrainConfig,
    loss: L,
    mut dev_score: D,
) -> Result<TrainReport>
where
    L: for<'p> Fn(&mut Tape<'p>, &'p ParameterSet, &I, &mut ChaCha8Rng) -> Result<Var>,
    D: FnMut(&ParameterSet) -> Result<Option<f64>>,
{
    if items.is_empty() {
        return Err(Error::invalid("no training instances"));
    }
    if config.batch_size == 0 {
        return Err(Error::invalid("batch size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = OptimizerState::new();
    let mut report = TrainReport::default();
    let mut best: Option<(f64, ParameterSet)> = None;
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..items.len()).collect();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut skipped = 0;
        for batch in order.chunks(config.batch_size) {
            let tape_seed = rng.gen();
            let (batch_loss, grads) = {
                let mut tape = Tape::new(Mode::Train)
                    .with_seed(tape_seed)
                    .with_precision(config.precision);
                let mut terms = Vec::with_capacity(batch.len());
                for &i in batch {
                    terms.push(loss(&mut tape, params, &items[i], &mut rng)?);
                }
                let sum = tape.sum_all(&terms)?;
                let mean = tape.affine(sum, 1.0 / batch.len() as f64, 0.0)?;
                let value = tape.scalar(sum);
                (value, tape.backward(mean)?.parameters())
            };
            total += batch_loss;
            let step = adam_step(params, &grads, &mut state, &config.adam, config.precision);
            skipped += step.skipped.len();
        }
        let train_loss = total / items.len() as f64;
        let score = dev_score(params)?;
        log::info!("epoch {epoch}: train loss {train_loss:.4} dev {score:?}");
        report.epochs.push(EpochLog {
            epoch,
            train_loss,
            dev_score: score,
            skipped_updates: skipped,
        });
        if let Some(s) = score {
            if best.as_ref().map_or(true, |(b, _)| s > *b) {
                best = Some((s, params.clone()));
                report.best_epoch = Some(epoch);
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= config.patience {
                    report.stopped_early = true;
                    break;
                }
            }
        }
    }
    if let Some((_, p)) = best {
        *params = p;
    }
    Ok(report)
}
