//! AdamW: Adam moments with bias correction, weight decay applied directly to
//! the parameters instead of being folded into the gradient.
//!
//! ```text
//! m_t = β1 m_{t-1} + (1 - β1) g
//! v_t = β2 v_{t-1} + (1 - β2) g²
//! w  <- w - lr · m̂_t / (sqrt(v̂_t) + ε) - lr · λ · w
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::classifier::{ClassifierParams, DenseLayer, Gradients};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerState {
    pub config: AdamWConfig,
    pub first_moment: Vec<DenseLayer>,
    pub second_moment: Vec<DenseLayer>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ClassifierParams, config: AdamWConfig) -> Self {
        let zeros = || Gradients::zeros_like(params).layers;
        OptimizerState {
            config,
            first_moment: zeros(),
            second_moment: zeros(),
            step: 0,
        }
    }

    pub fn matches(&self, params: &ClassifierParams) -> bool {
        let same = |moments: &[DenseLayer]| {
            moments.len() == params.layers.len() && moments.iter().zip(&params.layers).all(|(m, l)| m.same_shape(l))
        };
        same(&self.first_moment) && same(&self.second_moment)
    }
}

/// One AdamW update. Leaves `params` and `opt` untouched on error.
pub fn step(params: &mut ClassifierParams, grads: &Gradients, opt: &mut OptimizerState, lr: f64) -> Result<()> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    if !opt.matches(params)
        || grads.layers.len() != params.layers.len()
        || grads.layers.iter().zip(&params.layers).any(|(g, l)| !g.same_shape(l))
    {
        return Err(Error::InvalidParameter(
            "gradient/optimizer shapes do not match parameters".into(),
        ));
    }
    if grads.values().any(|g| !g.is_finite()) {
        return Err(Error::Diverged("non-finite gradient".into()));
    }

    let AdamWConfig {
        beta1,
        beta2,
        eps,
        weight_decay,
    } = opt.config;
    let t = opt.step + 1;
    let bias1 = 1.0 - beta1.powf(t as f64);
    let bias2 = 1.0 - beta2.powf(t as f64);

    let mut next_params = params.clone();
    let mut next_m = opt.first_moment.clone();
    let mut next_v = opt.second_moment.clone();
    let grad_values = grads.layers.iter().flat_map(DenseLayer::values);
    let slots = next_params
        .values_mut()
        .zip(next_m.iter_mut().flat_map(DenseLayer::values_mut))
        .zip(next_v.iter_mut().flat_map(DenseLayer::values_mut))
        .zip(grad_values);
    for (((w, m), v), &g) in slots {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *w = *w - lr * (m_hat / (v_hat.sqrt() + eps)) - lr * weight_decay * *w;
    }
    if next_params.values().any(|w| !w.is_finite()) {
        return Err(Error::Diverged("non-finite parameter after update".into()));
    }

    *params = next_params;
    opt.first_moment = next_m;
    opt.second_moment = next_v;
    opt.step = t;
    Ok(())
}
