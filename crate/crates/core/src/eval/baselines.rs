//! Comparator query rules: random sampling, maximum entropy, smallest margin,
//! and least confidence (the rule the proposed method uses).

use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProbVector;
use crate::seed;
use crate::strategy::{select_top, uncertainty, UncertaintyScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    #[default]
    LeastConfidence,
    Random,
    Entropy,
    Margin,
}

/// Shannon entropy in nats.
pub fn entropy(p: &ProbVector) -> f64 {
    0.0 - p.probs().iter().filter(|&&q| q > 0.0).map(|&q| q * q.ln()).sum::<f64>()
}

/// Gap between the two largest probabilities.
pub fn margin(p: &ProbVector) -> f64 {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &q in p.probs() {
        if q > first {
            second = first;
            first = q;
        } else if q > second {
            second = q;
        }
    }
    first - second
}

/// Picks `m` ids outside `excluded` according to `kind`.
///
/// Scored rules rank like [`select_top`]: descending informativeness, ties by
/// ascending id. `seed` is only used by [`Selector::Random`].
pub fn baseline_select(
    kind: Selector,
    pool: &[(u64, ProbVector)],
    m: usize,
    excluded: &HashSet<u64>,
    seed_value: u64,
) -> Result<Vec<u64>> {
    let scored = |f: fn(&ProbVector) -> f64| -> Vec<UncertaintyScore> {
        pool.iter()
            .map(|(id, p)| UncertaintyScore {
                sample_id: *id,
                score: f(p),
            })
            .collect()
    };
    match kind {
        Selector::LeastConfidence => select_top(&scored(uncertainty), m, excluded),
        Selector::Entropy => select_top(&scored(entropy), m, excluded),
        Selector::Margin => select_top(&scored(|p| -margin(p)), m, excluded),
        Selector::Random => {
            let mut candidates: Vec<u64> = pool
                .iter()
                .map(|(id, _)| *id)
                .filter(|id| !excluded.contains(id))
                .collect();
            if candidates.len() < m {
                return Err(Error::PoolExhausted {
                    requested: m,
                    available: candidates.len(),
                });
            }
            let mut rng = seed::rng(seed_value);
            candidates.shuffle(&mut rng);
            candidates.truncate(m);
            Ok(candidates)
        }
    }
}
