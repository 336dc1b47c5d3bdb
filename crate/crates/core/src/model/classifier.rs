use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Normalized class probabilities for one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidParameter(
                "probability vector needs at least two classes".into(),
            ));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidParameter(format!(
                "probability entries must lie in [0, 1]: {probs:?}"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::InvalidParameter(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(ProbVector(probs))
    }

    /// Softmax of `logits`; fails if the logits are not finite.
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::Diverged(format!("non-finite logits {logits:?}")));
        }
        Ok(ProbVector(softmax(logits)))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Most probable class, smallest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = k;
            }
        }
        best
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        ProbVector::new(value)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(value: ProbVector) -> Self {
        value.0
    }
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Architecture {
    #[default]
    SoftmaxLinear,
    /// One tanh hidden layer followed by a softmax output layer.
    Mlp1Hidden { hidden_units: usize },
}

/// Affine map `y = W x + b` with `W` stored row-major as `rows x cols`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseLayer {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseLayer {
            rows,
            cols,
            weight: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                let row = &self.weight[r * self.cols..(r + 1) * self.cols];
                let mut acc = self.bias[r];
                for (w, x) in row.iter().zip(input) {
                    acc += w * x;
                }
                acc
            })
            .collect()
    }

    pub fn same_shape(&self, other: &DenseLayer) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.weight.len() == other.weight.len()
            && self.bias.len() == other.bias.len()
    }

    fn well_formed(&self) -> bool {
        self.weight.len() == self.rows * self.cols && self.bias.len() == self.rows
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weight.iter().chain(self.bias.iter())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weight.iter_mut().chain(self.bias.iter_mut())
    }
}

/// Anything that maps a feature vector to class probabilities.
pub trait Classifier {
    fn num_classes(&self) -> usize;
    fn dim(&self) -> usize;
    fn predict_proba(&self, features: &[f64]) -> Result<ProbVector>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierParams {
    pub architecture: Architecture,
    pub num_classes: usize,
    pub dim: usize,
    pub layers: Vec<DenseLayer>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
pub(crate) struct ForwardPass {
    pub hidden: Option<Vec<f64>>,
    pub probs: Vec<f64>,
}

impl ClassifierParams {
    fn layer_shapes(architecture: Architecture, dim: usize, num_classes: usize) -> Vec<(usize, usize)> {
        match architecture {
            Architecture::SoftmaxLinear => vec![(num_classes, dim)],
            Architecture::Mlp1Hidden { hidden_units } => {
                vec![(hidden_units, dim), (num_classes, hidden_units)]
            }
        }
    }

    fn check_shape_args(architecture: Architecture, dim: usize, num_classes: usize) -> Result<()> {
        if dim == 0 || num_classes < 2 {
            return Err(Error::InvalidParameter(format!(
                "classifier needs dim >= 1 and num_classes >= 2, got dim={dim}, K={num_classes}"
            )));
        }
        if let Architecture::Mlp1Hidden { hidden_units: 0 } = architecture {
            return Err(Error::InvalidParameter("hidden_units must be at least 1".into()));
        }
        Ok(())
    }

    pub fn zeros(architecture: Architecture, dim: usize, num_classes: usize) -> Result<Self> {
        Self::check_shape_args(architecture, dim, num_classes)?;
        let layers = Self::layer_shapes(architecture, dim, num_classes)
            .into_iter()
            .map(|(r, c)| DenseLayer::zeros(r, c))
            .collect();
        Ok(ClassifierParams {
            architecture,
            num_classes,
            dim,
            layers,
        })
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init(architecture: Architecture, dim: usize, num_classes: usize, seed_value: u64) -> Result<Self> {
        let mut params = Self::zeros(architecture, dim, num_classes)?;
        let mut rng = seed::rng(seed_value);
        for layer in &mut params.layers {
            let bound = 1.0 / (layer.cols as f64).sqrt();
            for w in &mut layer.weight {
                *w = rng.random_range(-bound..bound);
            }
        }
        Ok(params)
    }

    /// Checks layer shapes against the architecture and that every value is finite.
    pub fn validate(&self) -> Result<()> {
        Self::check_shape_args(self.architecture, self.dim, self.num_classes)?;
        let shapes = Self::layer_shapes(self.architecture, self.dim, self.num_classes);
        if shapes.len() != self.layers.len()
            || shapes
                .iter()
                .zip(&self.layers)
                .any(|(&(r, c), l)| l.rows != r || l.cols != c || !l.well_formed())
        {
            return Err(Error::InvalidParameter(
                "layer shapes do not match the architecture".into(),
            ));
        }
        if self.layers.iter().flat_map(DenseLayer::values).any(|v| !v.is_finite()) {
            return Err(Error::Diverged("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(DenseLayer::values)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(DenseLayer::values_mut)
    }

    pub(crate) fn check_input(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: features.len(),
            });
        }
        Ok(())
    }

    pub fn logits(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_input(features)?;
        Ok(self.forward_logits(features).1)
    }

    fn forward_logits(&self, features: &[f64]) -> (Option<Vec<f64>>, Vec<f64>) {
        match self.architecture {
            Architecture::SoftmaxLinear => (None, self.layers[0].forward(features)),
            Architecture::Mlp1Hidden { .. } => {
                let hidden: Vec<f64> = self.layers[0].forward(features).into_iter().map(f64::tanh).collect();
                let logits = self.layers[1].forward(&hidden);
                (Some(hidden), logits)
            }
        }
    }

    pub(crate) fn forward(&self, features: &[f64]) -> Result<ForwardPass> {
        self.check_input(features)?;
        let (hidden, logits) = self.forward_logits(features);
        let probs = ProbVector::from_logits(&logits)?.0;
        Ok(ForwardPass { hidden, probs })
    }
}

impl Classifier for ClassifierParams {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn predict_proba(&self, features: &[f64]) -> Result<ProbVector> {
        self.check_input(features)?;
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite input features".into()));
        }
        let (_, logits) = self.forward_logits(features);
        ProbVector::from_logits(&logits)
    }
}

pub fn predict_proba(params: &ClassifierParams, features: &[f64]) -> Result<ProbVector> {
    params.predict_proba(features)
}

/// Gradient tensors, shaped like [`ClassifierParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseLayer>,
}

impl Gradients {
    pub fn zeros_like(params: &ClassifierParams) -> Self {
        Gradients {
            layers: params
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.rows, l.cols))
                .collect(),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(DenseLayer::values)
    }

    pub fn scaled(&self, factor: f64) -> Gradients {
        let mut out = self.clone();
        out.layers
            .iter_mut()
            .flat_map(DenseLayer::values_mut)
            .for_each(|v| *v *= factor);
        out
    }
}
