use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Classifier;

fn check_dims<C: Classifier + ?Sized>(model: &C, dataset: &Dataset) -> Result<()> {
    if model.dim() != dataset.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: dataset.dim(),
        });
    }
    if model.num_classes() != dataset.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: model.num_classes(),
            actual: dataset.num_classes(),
        });
    }
    if dataset.is_empty() {
        return Err(Error::InvalidParameter("empty evaluation set".into()));
    }
    Ok(())
}

/// Fraction of samples whose argmax prediction (smallest index on ties)
/// equals the true label.
pub fn accuracy<C: Classifier + ?Sized>(model: &C, dataset: &Dataset) -> Result<f64> {
    check_dims(model, dataset)?;
    let mut correct = 0usize;
    for s in dataset.samples() {
        if model.predict_proba(&s.features)?.argmax() == s.true_label.index() {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

/// Mean squared Euclidean distance between two models' probability vectors
/// over `holdout`. Zero for identical models, at most 2.
pub fn representativeness_divergence<A, B>(full: &A, budget: &B, holdout: &Dataset) -> Result<f64>
where
    A: Classifier + ?Sized,
    B: Classifier + ?Sized,
{
    check_dims(full, holdout)?;
    check_dims(budget, holdout)?;
    let mut total = 0.0;
    for s in holdout.samples() {
        let p = full.predict_proba(&s.features)?;
        let q = budget.predict_proba(&s.features)?;
        total += p
            .probs()
            .iter()
            .zip(q.probs())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(total / holdout.len() as f64)
}

/// Paired one-sided sign test of "first beats second".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// `P(X >= wins)` for `X ~ Binomial(wins + losses, 1/2)`; ties are dropped.
    pub p_value: f64,
}

pub fn sign_test(pairs: &[(f64, f64)]) -> SignTest {
    let wins = pairs.iter().filter(|(a, b)| a > b).count();
    let losses = pairs.iter().filter(|(a, b)| a < b).count();
    let ties = pairs.len() - wins - losses;
    let n = wins + losses;
    let ln_choose = |k: usize| -> f64 { (1..=k).map(|i| ((n - k + i) as f64).ln() - (i as f64).ln()).sum() };
    let p_value = if n == 0 {
        1.0
    } else {
        (wins..=n)
            .map(|k| (ln_choose(k) - n as f64 * std::f64::consts::LN_2).exp())
            .sum::<f64>()
            .min(1.0)
    };
    SignTest {
        wins,
        losses,
        ties,
        p_value,
    }
}
