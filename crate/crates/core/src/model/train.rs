use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;
use crate::strategy::{batch_weights, uncertainty, WeightingConfig};

use super::classifier::{Classifier, ClassifierParams};
use super::loss::{cross_entropy, grad_weighted_ce, Labeled};
use super::optim::{step, OptimizerState};
use super::schedule::TrainSchedule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    pub steps: usize,
    /// Weighted loss of the last minibatch, measured before its update.
    pub last_batch_loss: f64,
}

/// Mini-batch training over `data`.
///
/// Each epoch visits a fresh seeded shuffle in chunks of `batch_size`, the
/// last chunk possibly short. The learning rate follows the cosine schedule
/// over all steps of this call. With weighting enabled, each chunk's loss
/// weights come from [`batch_weights`] over the current model's uncertainties
/// on that chunk; otherwise every sample gets `1/b`.
pub fn train(
    params: &mut ClassifierParams,
    opt: &mut OptimizerState,
    data: &[Labeled<'_>],
    schedule: &TrainSchedule,
    weighting: &WeightingConfig,
    seed_value: u64,
) -> Result<TrainStats> {
    schedule.validate()?;
    weighting.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidParameter("no labeled data to train on".into()));
    }
    let batches_per_epoch = data.len().div_ceil(schedule.batch_size);
    let total_steps = schedule.epochs * batches_per_epoch;
    let mut rng = seed::rng(seed_value);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut t = 0;
    let mut last_batch_loss = f64::NAN;

    for _ in 0..schedule.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(schedule.batch_size) {
            let batch: Vec<Labeled<'_>> = chunk.iter().map(|&i| data[i]).collect();
            let probs = batch
                .iter()
                .map(|(x, _)| params.predict_proba(x))
                .collect::<Result<Vec<_>>>()?;
            let weights = if schedule.weighting_enabled {
                let scores: Vec<f64> = probs.iter().map(uncertainty).collect();
                batch_weights(&scores, weighting)?
            } else {
                vec![1.0 / batch.len() as f64; batch.len()]
            };
            last_batch_loss = probs
                .iter()
                .zip(&batch)
                .zip(&weights)
                .map(|((p, (_, y)), w)| w * cross_entropy(p, *y))
                .sum();
            let grads = grad_weighted_ce(params, &batch, &weights)?;
            let lr = schedule.lr(t, total_steps)?;
            step(params, &grads, opt, lr)?;
            t += 1;
        }
    }
    Ok(TrainStats {
        steps: t,
        last_batch_loss,
    })
}
