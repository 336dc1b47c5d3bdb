use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cosine decay from `lr_start` at `t = 0` to `lr_end` at `t = total_steps`.
///
/// Evaluated as `½(1 + c)·lr_start + ½(1 − c)·lr_end` with `c = cos(π t / T)`,
/// which equals `lr_end + ½(lr_start − lr_end)(1 + c)` and hits both
/// endpoints exactly in floating point.
pub fn cosine_lr(t: usize, total_steps: usize, lr_start: f64, lr_end: f64) -> Result<f64> {
    if total_steps == 0 || t > total_steps {
        return Err(Error::InvalidParameter(format!(
            "step {t} outside schedule of {total_steps} steps"
        )));
    }
    let c = (std::f64::consts::PI * t as f64 / total_steps as f64).cos();
    Ok(0.5 * (1.0 + c) * lr_start + 0.5 * (1.0 - c) * lr_end)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSchedule {
    pub lr_start: f64,
    pub lr_end: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Uncertainty-weighted loss when true, plain mean cross-entropy otherwise.
    pub weighting_enabled: bool,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            lr_start: 0.001,
            lr_end: 0.00001,
            epochs: 100,
            batch_size: 42,
            weighting_enabled: true,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr_end > 0.0 && self.lr_start >= self.lr_end && self.lr_start.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need lr_start >= lr_end > 0, got {} and {}",
                self.lr_start, self.lr_end
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn with_epochs(&self, epochs: usize) -> TrainSchedule {
        TrainSchedule { epochs, ..self.clone() }
    }

    pub fn lr(&self, t: usize, total_steps: usize) -> Result<f64> {
        cosine_lr(t, total_steps, self.lr_start, self.lr_end)
    }
}
