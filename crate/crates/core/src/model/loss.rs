use crate::data::ClassId;
use crate::error::{Error, Result};

use super::classifier::{Architecture, ClassifierParams, Gradients, ProbVector};

/// Lower clamp applied to probabilities inside the log.
pub const LOG_EPS: f64 = 1e-12;

/// One training example: features and label.
pub type Labeled<'a> = (&'a [f64], ClassId);

/// `-log(max(p[y], LOG_EPS))`.
pub fn cross_entropy(p: &ProbVector, y: ClassId) -> f64 {
    0.0 - p.probs()[y.index()].max(LOG_EPS).ln()
}

/// `dot(weights, losses)` for weights that form a distribution over the batch.
pub fn weighted_batch_loss(losses: &[f64], weights: &[f64]) -> Result<f64> {
    if losses.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: losses.len(),
            actual: weights.len(),
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidParameter(
            "loss weights must be finite and nonnegative".into(),
        ));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("loss weights sum to {sum}, not 1")));
    }
    Ok(losses.iter().zip(weights).map(|(l, w)| l * w).sum())
}

fn check_batch(params: &ClassifierParams, batch: &[Labeled<'_>], weights: &[f64]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    if batch.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: batch.len(),
            actual: weights.len(),
        });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidParameter(
            "loss weights must be finite and nonnegative".into(),
        ));
    }
    for (x, y) in batch {
        params.check_input(x)?;
        ClassId::checked(y.index(), params.num_classes)?;
    }
    Ok(())
}

/// `Σ w_i · CE(f(x_i), y_i)` with the weights held fixed.
pub fn weighted_ce_objective(params: &ClassifierParams, batch: &[Labeled<'_>], weights: &[f64]) -> Result<f64> {
    check_batch(params, batch, weights)?;
    let mut total = 0.0;
    for (&(x, y), &w) in batch.iter().zip(weights) {
        let probs = ProbVector::from_logits(&params.logits(x)?)?;
        total += w * cross_entropy(&probs, y);
    }
    Ok(total)
}

/// Analytic gradient of [`weighted_ce_objective`] with respect to every
/// parameter. Weights are constants: no gradient flows through them.
pub fn grad_weighted_ce(params: &ClassifierParams, batch: &[Labeled<'_>], weights: &[f64]) -> Result<Gradients> {
    check_batch(params, batch, weights)?;
    let mut grads = Gradients::zeros_like(params);
    let k = params.num_classes;
    for (&(x, y), &w) in batch.iter().zip(weights) {
        let pass = params.forward(x)?;
        // dL/dlogit_k = w (p_k - [k == y])
        let coef: Vec<f64> = (0..k)
            .map(|c| {
                let target = if c == y.index() { 1.0 } else { 0.0 };
                w * (pass.probs[c] - target)
            })
            .collect();
        match params.architecture {
            Architecture::SoftmaxLinear => {
                accumulate_outer(&mut grads.layers[0], &coef, x);
            }
            Architecture::Mlp1Hidden { .. } => {
                let hidden = pass.hidden.as_deref().expect("mlp forward keeps hidden activations");
                accumulate_outer(&mut grads.layers[1], &coef, hidden);
                let out = &params.layers[1];
                let delta: Vec<f64> = (0..out.cols)
                    .map(|j| {
                        let back: f64 = (0..out.rows).map(|r| out.weight[r * out.cols + j] * coef[r]).sum();
                        back * (1.0 - hidden[j] * hidden[j])
                    })
                    .collect();
                accumulate_outer(&mut grads.layers[0], &delta, x);
            }
        }
    }
    Ok(grads)
}

/// `layer.weight += delta ⊗ input`, `layer.bias += delta`.
fn accumulate_outer(layer: &mut super::DenseLayer, delta: &[f64], input: &[f64]) {
    let cols = layer.cols;
    for (r, &d) in delta.iter().enumerate() {
        let row = &mut layer.weight[r * cols..(r + 1) * cols];
        for (g, &xi) in row.iter_mut().zip(input) {
            *g += d * xi;
        }
        layer.bias[r] += d;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&pv(&[1.0, 0.0, 0.0]), ClassId(0)), 0.0);
        let uniform = pv(&[0.25; 4]);
        for y in 0..4 {
            assert!((cross_entropy(&uniform, ClassId(y)) - 1.386_294_361_119_890_6).abs() < 1e-15);
        }
        assert!((cross_entropy(&pv(&[0.5, 0.5]), ClassId(1)) - std::f64::consts::LN_2).abs() < 1e-15);
        // clamp keeps zero-probability targets finite
        assert!((cross_entropy(&pv(&[1.0, 0.0]), ClassId(1)) - 27.631_021_115_928_547).abs() < 1e-9);
    }

    #[test]
    fn weighted_loss_examples() {
        assert_eq!(weighted_batch_loss(&[2.0, 4.0], &[0.25, 0.75]).unwrap(), 3.5);
        assert_eq!(weighted_batch_loss(&[2.0, 4.0], &[0.5, 0.5]).unwrap(), 3.0);
        assert_eq!(weighted_batch_loss(&[2.0, 4.0, 7.5], &[0.0, 0.0, 1.0]).unwrap(), 7.5);
        assert!(weighted_batch_loss(&[2.0], &[0.5, 0.5]).is_err());
        assert!(weighted_batch_loss(&[2.0, 4.0], &[0.5, 0.6]).is_err());
        assert!(weighted_batch_loss(&[2.0, 4.0], &[1.5, -0.5]).is_err());
    }

    #[test]
    fn hand_computed_linear_gradient() {
        let params = ClassifierParams::zeros(Architecture::SoftmaxLinear, 1, 2).unwrap();
        let x = [1.0];
        let g = grad_weighted_ce(&params, &[(&x, ClassId(0))], &[1.0]).unwrap();
        // p = [0.5, 0.5]; dL/dW = (p - e_0) x
        assert_eq!(g.layers[0].weight, vec![-0.5, 0.5]);
        assert_eq!(g.layers[0].bias, vec![-0.5, 0.5]);
    }

    #[test]
    fn batch_errors() {
        let params = ClassifierParams::zeros(Architecture::SoftmaxLinear, 2, 2).unwrap();
        let x = [1.0, 2.0];
        assert!(grad_weighted_ce(&params, &[], &[]).is_err());
        assert!(grad_weighted_ce(&params, &[(&x, ClassId(0))], &[0.5, 0.5]).is_err());
        assert!(grad_weighted_ce(&params, &[(&x[..1], ClassId(0))], &[1.0]).is_err());
        assert!(grad_weighted_ce(&params, &[(&x, ClassId(2))], &[1.0]).is_err());
    }
}
