//! Which samples to query, and how much each sample weighs in the loss.
//!
//! Uncertainty is least confidence, `u = 1 - max_k p_k`. Loss weights over a
//! batch of size `b` min-max scale the uncertainties to `s_i = α (u_i - min u)
//! / (max u - min u)` and normalize them to sum to one, either exponentially
//! (`exp(s_i) / Σ exp(s_j)`, where α acts as an inverse temperature) or
//! linearly (`s_i / Σ s_j`, where α cancels).

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{Classifier, ProbVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyScore {
    pub sample_id: u64,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    #[default]
    SoftmaxNorm,
    LinearNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightingConfig {
    pub alpha: f64,
    pub norm_mode: NormMode,
}

impl Default for WeightingConfig {
    fn default() -> Self {
        WeightingConfig {
            alpha: 1.0,
            norm_mode: NormMode::SoftmaxNorm,
        }
    }
}

impl WeightingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// `1 - max_k p_k`, clamped to `[0, 1 - 1/K]` against rounding in the inputs.
pub fn uncertainty(p: &ProbVector) -> f64 {
    let ceiling = 1.0 - 1.0 / p.len() as f64;
    (1.0 - p.max()).clamp(0.0, ceiling)
}

/// Per-sample loss weights for one batch. Sums to one and is nondecreasing in
/// the score. A constant batch (including `b = 1`) gets uniform weights.
pub fn batch_weights(scores: &[f64], config: &WeightingConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if scores.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    if scores.iter().any(|u| !u.is_finite()) {
        return Err(Error::InvalidParameter("non-finite uncertainty score".into()));
    }
    let b = scores.len();
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if b == 1 || max == min {
        return Ok(vec![1.0 / b as f64; b]);
    }
    let range = max - min;
    let scaled = scores.iter().map(|u| (u - min) / range);
    let weights = match config.norm_mode {
        NormMode::SoftmaxNorm => {
            // s_i <= α, so shifting by α keeps exp bounded.
            let exps: Vec<f64> = scaled.map(|t| (config.alpha * t - config.alpha).exp()).collect();
            let sum: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / sum).collect()
        }
        NormMode::LinearNorm => {
            // α scales numerator and denominator alike and is dropped.
            let scaled: Vec<f64> = scaled.collect();
            let sum: f64 = scaled.iter().sum();
            scaled.into_iter().map(|t| t / sum).collect()
        }
    };
    Ok(weights)
}

/// The `m` highest-scoring ids outside `excluded`, ordered by descending score
/// then ascending id.
pub fn select_top(scores: &[UncertaintyScore], m: usize, excluded: &HashSet<u64>) -> Result<Vec<u64>> {
    let mut candidates: Vec<UncertaintyScore> = scores
        .iter()
        .filter(|s| !excluded.contains(&s.sample_id))
        .copied()
        .collect();
    if candidates.len() < m {
        return Err(Error::PoolExhausted {
            requested: m,
            available: candidates.len(),
        });
    }
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.sample_id.cmp(&b.sample_id)));
    Ok(candidates.into_iter().take(m).map(|s| s.sample_id).collect())
}

/// Model probabilities for every sample of `dataset`, in dataset order.
pub fn predict_all<C: Classifier + ?Sized>(model: &C, dataset: &Dataset) -> Result<Vec<ProbVector>> {
    dataset
        .samples()
        .iter()
        .map(|s| model.predict_proba(&s.features))
        .collect()
}

pub fn score_pool<C: Classifier + ?Sized>(model: &C, dataset: &Dataset) -> Result<Vec<UncertaintyScore>> {
    let probs = predict_all(model, dataset)?;
    Ok(dataset
        .samples()
        .iter()
        .zip(&probs)
        .map(|(s, p)| UncertaintyScore {
            sample_id: s.id,
            score: uncertainty(p),
        })
        .collect())
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    fn linear(alpha: f64) -> WeightingConfig {
        WeightingConfig {
            alpha,
            norm_mode: NormMode::LinearNorm,
        }
    }

    #[test]
    fn uncertainty_examples() {
        assert_eq!(uncertainty(&pv(&[1.0, 0.0, 0.0, 0.0])), 0.0);
        assert_eq!(uncertainty(&pv(&[0.25; 4])), 0.75);
        assert!((uncertainty(&pv(&[0.7, 0.1, 0.1, 0.1])) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn linear_weights_example() {
        let w = batch_weights(&[0.1, 0.5, 0.9], &linear(1.0)).unwrap();
        let expected = [0.0, 1.0 / 3.0, 2.0 / 3.0];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{w:?}");
        }
    }

    #[test]
    fn softmax_weights_example() {
        // exp([0, .5, 1]) / sum, 30-digit evaluation
        let expected = [
            0.186_323_723_225_847_577,
            0.307_195_885_718_498_397,
            0.506_480_391_055_654_026,
        ];
        let w = batch_weights(&[0.1, 0.5, 0.9], &WeightingConfig::default()).unwrap();
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{w:?}");
        }
    }

    #[test]
    fn degenerate_batches_are_uniform() {
        for cfg in [WeightingConfig::default(), linear(2.0)] {
            assert_eq!(batch_weights(&[0.4, 0.4, 0.4], &cfg).unwrap(), vec![1.0 / 3.0; 3]);
            assert_eq!(batch_weights(&[0.7], &cfg).unwrap(), vec![1.0]);
        }
    }

    #[test]
    fn weight_errors() {
        assert!(batch_weights(&[0.1, f64::NAN], &WeightingConfig::default()).is_err());
        assert!(batch_weights(&[], &WeightingConfig::default()).is_err());
        assert!(batch_weights(&[0.1, 0.2], &linear(0.0)).is_err());
        assert!(batch_weights(&[0.1, 0.2], &linear(f64::INFINITY)).is_err());
    }

    #[test]
    fn select_top_examples() {
        let scores = [
            UncertaintyScore {
                sample_id: 1,
                score: 0.9,
            },
            UncertaintyScore {
                sample_id: 2,
                score: 0.1,
            },
            UncertaintyScore {
                sample_id: 3,
                score: 0.5,
            },
        ];
        assert_eq!(select_top(&scores, 2, &HashSet::new()).unwrap(), vec![1, 3]);
        let excluded: HashSet<u64> = [1].into();
        assert_eq!(select_top(&scores, 2, &excluded).unwrap(), vec![3, 2]);
        assert!(matches!(
            select_top(&scores, 3, &excluded),
            Err(Error::PoolExhausted {
                requested: 3,
                available: 2
            })
        ));

        let ties: Vec<UncertaintyScore> = [7, 3, 5, 9]
            .iter()
            .map(|&id| UncertaintyScore {
                sample_id: id,
                score: 0.5,
            })
            .collect();
        assert_eq!(select_top(&ties, 2, &HashSet::new()).unwrap(), vec![3, 5]);
    }
}
