//! Independent oracles shared by the integration tests.
//!
//! The reference loop and the brute-force selector share no code with the
//! crate: forward pass, softmax, gradient, AdamW, the cosine schedule and the
//! ranking are re-derived from their formulas. The finite-difference check
//! differentiates the crate's own objective, which is what it is meant to test
//! the gradient against.

#![allow(dead_code)]

use std::collections::HashSet;

use activelabel::data::ClassId;
use activelabel::model::{weighted_ce_objective, AdamWConfig, Architecture, ClassifierParams, Labeled, TrainSchedule};
use activelabel::strategy::{batch_weights, UncertaintyScore, WeightingConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Plain mini-batch cross-entropy with AdamW and cosine decay, for a
/// softmax-linear model stored as `weight[k][j]`, `bias[k]`.
pub struct ReferenceLinear {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl ReferenceLinear {
    pub fn from_params(params: &ClassifierParams) -> Self {
        let layer = &params.layers[0];
        ReferenceLinear {
            weight: layer.weight.chunks(layer.cols).map(<[f64]>::to_vec).collect(),
            bias: layer.bias.clone(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.weight.iter().flatten().copied().collect();
        out.extend(&self.bias);
        out
    }

    fn probs(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self
            .weight
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| {
                let mut z = *b;
                for (w, xi) in row.iter().zip(x) {
                    z += w * xi;
                }
                z
            })
            .collect();
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|z| (z - top).exp()).collect();
        let s: f64 = e.iter().sum();
        e.iter().map(|v| v / s).collect()
    }

    pub fn train(&mut self, data: &[(Vec<f64>, usize)], schedule: &TrainSchedule, opt: AdamWConfig, seed: u64) {
        let k = self.bias.len();
        let d = self.weight[0].len();
        let mut m_w = vec![vec![0.0; d]; k];
        let mut v_w = vec![vec![0.0; d]; k];
        let mut m_b = vec![0.0; k];
        let mut v_b = vec![0.0; k];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let per_epoch = data.len().div_ceil(schedule.batch_size);
        let total = schedule.epochs * per_epoch;
        let mut t = 0usize;
        for _ in 0..schedule.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(schedule.batch_size) {
                let inv_b = 1.0 / chunk.len() as f64;
                let mut g_w = vec![vec![0.0; d]; k];
                let mut g_b = vec![0.0; k];
                for &i in chunk {
                    let (x, y) = &data[i];
                    let p = self.probs(x);
                    for c in 0..k {
                        let delta = inv_b * (p[c] - if c == *y { 1.0 } else { 0.0 });
                        for j in 0..d {
                            g_w[c][j] += delta * x[j];
                        }
                        g_b[c] += delta;
                    }
                }
                let cos = (std::f64::consts::PI * t as f64 / total as f64).cos();
                let lr = 0.5 * (1.0 + cos) * schedule.lr_start + 0.5 * (1.0 - cos) * schedule.lr_end;
                let step = (t + 1) as f64;
                let c1 = 1.0 - opt.beta1.powf(step);
                let c2 = 1.0 - opt.beta2.powf(step);
                let adamw = |w: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
                    *m = opt.beta1 * *m + (1.0 - opt.beta1) * g;
                    *v = opt.beta2 * *v + (1.0 - opt.beta2) * g * g;
                    let update = (*m / c1) / ((*v / c2).sqrt() + opt.eps);
                    *w = *w - lr * update - lr * opt.weight_decay * *w;
                };
                for c in 0..k {
                    for j in 0..d {
                        adamw(&mut self.weight[c][j], &mut m_w[c][j], &mut v_w[c][j], g_w[c][j]);
                    }
                }
                for c in 0..k {
                    adamw(&mut self.bias[c], &mut m_b[c], &mut v_b[c], g_b[c]);
                }
                t += 1;
            }
        }
    }
}

/// Top `m` by repeatedly scanning for the best remaining candidate.
pub fn brute_force_top(scores: &[UncertaintyScore], m: usize, excluded: &HashSet<u64>) -> Option<Vec<u64>> {
    let mut taken: HashSet<u64> = excluded.clone();
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let mut best: Option<UncertaintyScore> = None;
        for s in scores {
            if taken.contains(&s.sample_id) {
                continue;
            }
            best = match best {
                None => Some(*s),
                Some(b) if s.score > b.score || (s.score == b.score && s.sample_id < b.sample_id) => Some(*s),
                keep => keep,
            };
        }
        let b = best?;
        taken.insert(b.sample_id);
        out.push(b.sample_id);
    }
    Some(out)
}

/// A random gradient-check instance.
pub struct FdInstance {
    pub params: ClassifierParams,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<ClassId>,
    pub weights: Vec<f64>,
}

impl FdInstance {
    pub fn batch(&self) -> Vec<Labeled<'_>> {
        self.xs.iter().map(Vec::as_slice).zip(self.ys.iter().copied()).collect()
    }
}

/// d ≤ 8, K ≤ 5, b ≤ 6, hidden ≤ 16; half the instances are MLPs.
pub fn random_fd_instance(rng: &mut ChaCha8Rng) -> FdInstance {
    let d = rng.random_range(1..=8);
    let k = rng.random_range(2..=5);
    let b = rng.random_range(1..=6);
    let arch = if rng.random_bool(0.5) {
        Architecture::SoftmaxLinear
    } else {
        Architecture::Mlp1Hidden {
            hidden_units: rng.random_range(1..=16),
        }
    };
    let mut params = ClassifierParams::init(arch, d, k, rng.random()).unwrap();
    for v in params.values_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v += 0.3 * z;
    }
    let xs: Vec<Vec<f64>> = (0..b)
        .map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect())
        .collect();
    let ys = (0..b).map(|_| ClassId(rng.random_range(0..k))).collect();
    let scores: Vec<f64> = (0..b).map(|_| rng.random_range(0.0..0.75)).collect();
    let weights = batch_weights(&scores, &WeightingConfig::default()).unwrap();
    FdInstance {
        params,
        xs,
        ys,
        weights,
    }
}

pub const FD_STEP: f64 = 1e-6;
/// Denominator floor: components with |gradient| below it are compared in
/// absolute terms.
pub const FD_FLOOR: f64 = 1e-6;

/// Largest per-parameter relative error between the analytic gradient and a
/// central difference, `|a - n| / max(|a|, |n|, FD_FLOOR)`.
pub fn fd_max_rel_error(inst: &FdInstance) -> f64 {
    let batch = inst.batch();
    let analytic: Vec<f64> = activelabel::model::grad_weighted_ce(&inst.params, &batch, &inst.weights)
        .unwrap()
        .values()
        .copied()
        .collect();
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let shifted = |delta: f64| {
            let mut p = inst.params.clone();
            *p.values_mut().nth(i).unwrap() += delta;
            weighted_ce_objective(&p, &batch, &inst.weights).unwrap()
        };
        let numeric = (shifted(FD_STEP) - shifted(-FD_STEP)) / (2.0 * FD_STEP);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_FLOOR);
        worst = worst.max(rel);
    }
    worst
}

/// A probability vector drawn to cover the simplex interior, its corners and
/// near-ties.
pub fn random_probs(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let k = rng.random_range(2..=10);
    match rng.random_range(0..4) {
        0 => {
            let mut p = vec![0.0; k];
            p[rng.random_range(0..k)] = 1.0;
            p
        }
        1 => vec![1.0 / k as f64; k],
        _ => {
            let scale = rng.random_range(0.1..30.0);
            let logits: Vec<f64> = (0..k)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    scale * z
                })
                .collect();
            activelabel::model::softmax(&logits)
        }
    }
}
