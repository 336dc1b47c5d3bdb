//! The active-labeling session.
//!
//! A session starts by training the freshly initialized classifier on uniform
//! random pseudo-labels for the whole pool, so the first uncertainty scores
//! come from a model rather than from initialization noise. It then alternates
//! between two states:
//!
//! - `awaiting_labels`: `pending_query` holds the ids chosen for this round
//! - after [`Session::submit_labels`]: the classifier is fine-tuned on every
//!   oracle label so far, the pool is rescored and the next round's quota is
//!   selected, or the session is `complete`
//!
//! The random pseudo-labels are used for warmup only and are never counted
//! against the budget or kept in the state.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{plan_rounds, split_holdout, ClassId, Dataset, LabelRecord, LabelSource, RoundPlan};
use crate::error::{Error, Result};
use crate::eval::{accuracy, baseline_select, Selector};
use crate::model::{train, AdamWConfig, Architecture, ClassifierParams, Labeled, OptimizerState, TrainSchedule};
use crate::seed;
use crate::strategy::{predict_all, select_top, uncertainty, UncertaintyScore, WeightingConfig};

pub const SESSION_FORMAT: &str = "activelabel-session";
pub const SESSION_VERSION: u32 = 1;

mod tag {
    pub const SPLIT: u64 = 1;
    pub const INIT: u64 = 2;
    pub const WARMUP_LABELS: u64 = 3;
    pub const WARMUP_TRAIN: u64 = 4;
    pub const ROUND_TRAIN: u64 = 1_000;
    pub const ROUND_SELECT: u64 = 2_000;
}

/// Source of ground-truth labels.
pub trait Oracle {
    fn label_of(&self, sample_id: u64) -> Result<ClassId>;
    fn source(&self) -> LabelSource;
}

/// Answers from the hidden `true_label` of a dataset.
pub struct SimulatedOracle<'a> {
    dataset: &'a Dataset,
}

impl<'a> SimulatedOracle<'a> {
    pub fn new(dataset: &'a Dataset) -> Self {
        SimulatedOracle { dataset }
    }
}

impl Oracle for SimulatedOracle<'_> {
    fn label_of(&self, sample_id: u64) -> Result<ClassId> {
        self.dataset
            .get(sample_id)
            .map(|s| s.true_label)
            .ok_or(Error::UnknownSample(sample_id))
    }

    fn source(&self) -> LabelSource {
        LabelSource::OracleSim
    }
}

fn default_warmup_epochs() -> usize {
    1
}

fn default_holdout_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    /// Registered dataset name (service) or manifest path (CLI).
    pub dataset: String,
    #[serde(alias = "n")]
    pub budget: usize,
    #[serde(alias = "r")]
    pub rounds: usize,
    #[serde(default)]
    pub schedule: TrainSchedule,
    /// Fine-tuning epochs per round; `schedule.epochs / rounds` when unset.
    #[serde(default)]
    pub epochs_per_round: Option<usize>,
    #[serde(default)]
    pub weighting: WeightingConfig,
    #[serde(default = "default_warmup_epochs")]
    pub warmup_epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub architecture: Architecture,
    #[serde(default)]
    pub selector: Selector,
    /// Reinitialize the classifier each round instead of fine-tuning it.
    #[serde(default)]
    pub retrain_from_scratch: bool,
    #[serde(default = "default_holdout_fraction")]
    pub holdout_fraction: f64,
    #[serde(default)]
    pub optimizer: AdamWConfig,
}

impl SessionConfig {
    pub fn new(dataset: impl Into<String>, budget: usize, rounds: usize, seed: u64) -> Self {
        SessionConfig {
            dataset: dataset.into(),
            budget,
            rounds,
            schedule: TrainSchedule::default(),
            epochs_per_round: None,
            weighting: WeightingConfig::default(),
            warmup_epochs: default_warmup_epochs(),
            seed,
            architecture: Architecture::default(),
            selector: Selector::default(),
            retrain_from_scratch: false,
            holdout_fraction: default_holdout_fraction(),
            optimizer: AdamWConfig::default(),
        }
    }

    pub fn round_epochs(&self) -> usize {
        self.epochs_per_round
            .unwrap_or_else(|| (self.schedule.epochs / self.rounds.max(1)).max(1))
    }

    pub fn validate(&self) -> Result<()> {
        plan_rounds(self.budget, self.rounds)?;
        self.schedule.validate()?;
        self.weighting.validate()?;
        if self.epochs_per_round == Some(0) {
            return Err(Error::InvalidParameter("epochs_per_round must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    AwaitingLabels,
    Training,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    /// 0 for the post-warmup model, then 1..=r.
    pub round: usize,
    pub labeled_count: usize,
    pub holdout_accuracy: f64,
    pub mean_pool_uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionState {
    pub session_id: String,
    pub config: SessionConfig,
    pub plan: RoundPlan,
    pub params: ClassifierParams,
    pub opt: OptimizerState,
    /// Oracle answers in the order they were applied.
    pub labels: Vec<LabelRecord>,
    /// Number of completed query rounds.
    pub current_round: usize,
    pub pending_query: Vec<u64>,
    pub initial: RoundMetrics,
    pub history: Vec<RoundMetrics>,
    pub status: SessionStatus,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionFile {
    format: String,
    version: u32,
    state: SessionState,
}

impl SessionState {
    pub fn budget_labels(&self) -> usize {
        self.labels.iter().filter(|r| r.counts_against_budget()).count()
    }

    pub fn labeled_ids(&self) -> HashSet<u64> {
        self.labels.iter().map(|r| r.sample_id).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = SessionFile {
            format: SESSION_FORMAT.into(),
            version: SESSION_VERSION,
            state: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SessionFile = serde_json::from_str(text)?;
        if file.format != SESSION_FORMAT || file.version != SESSION_VERSION {
            return Err(Error::Format(format!(
                "expected {SESSION_FORMAT} v{SESSION_VERSION}, found {} v{}",
                file.format, file.version
            )));
        }
        Ok(file.state)
    }
}

/// Uniform random class for every pool sample.
pub fn warmup_random_labels(pool: &Dataset, seed_value: u64) -> Vec<LabelRecord> {
    let mut rng = seed::rng(seed_value);
    let k = pool.num_classes();
    pool.samples()
        .iter()
        .map(|s| LabelRecord {
            sample_id: s.id,
            label: ClassId(rng.random_range(0..k)),
            source: LabelSource::RandomWarmup,
            round: 0,
        })
        .collect()
}

/// A session together with the pool and holdout it runs on.
#[derive(Debug, Clone)]
pub struct Session {
    state: SessionState,
    pool: Dataset,
    holdout: Dataset,
}

impl Session {
    /// Splits `dataset` into pool and holdout by the config seed and starts.
    pub fn start(session_id: impl Into<String>, config: SessionConfig, dataset: &Dataset) -> Result<Self> {
        config.validate()?;
        let (pool, holdout) = split_holdout(dataset, config.holdout_fraction, seed::derive(config.seed, tag::SPLIT))?;
        Self::start_with_split(session_id, config, pool, holdout)
    }

    pub fn start_with_split(
        session_id: impl Into<String>,
        config: SessionConfig,
        pool: Dataset,
        holdout: Dataset,
    ) -> Result<Self> {
        config.validate()?;
        if config.budget > pool.len() {
            return Err(Error::BudgetExceedsPool {
                budget: config.budget,
                pool: pool.len(),
            });
        }
        let plan = plan_rounds(config.budget, config.rounds)?;
        let (params, mut opt) = fresh_model(&config, &pool)?;
        let mut params = params;

        if config.warmup_epochs > 0 {
            let warm = warmup_random_labels(&pool, seed::derive(config.seed, tag::WARMUP_LABELS));
            let data: Vec<Labeled<'_>> = warm
                .iter()
                .map(|r| {
                    (
                        pool.get(r.sample_id)
                            .expect("warmup ids come from the pool")
                            .features
                            .as_slice(),
                        r.label,
                    )
                })
                .collect();
            train(
                &mut params,
                &mut opt,
                &data,
                &config.schedule.with_epochs(config.warmup_epochs),
                &config.weighting,
                seed::derive(config.seed, tag::WARMUP_TRAIN),
            )?;
        }

        let initial = round_metrics(&params, &pool, &holdout, 0, 0)?;
        let pending_query = select(&config, &params, &pool, 0, plan.per_round[0], &HashSet::new())?;
        let state = SessionState {
            session_id: session_id.into(),
            config,
            plan,
            params,
            opt,
            labels: Vec::new(),
            current_round: 0,
            pending_query,
            initial,
            history: Vec::new(),
            status: SessionStatus::AwaitingLabels,
        };
        Ok(Session { state, pool, holdout })
    }

    /// Rebuilds a session from persisted state, recomputing the split.
    pub fn resume(state: SessionState, dataset: &Dataset) -> Result<Self> {
        let (pool, holdout) = split_holdout(
            dataset,
            state.config.holdout_fraction,
            seed::derive(state.config.seed, tag::SPLIT),
        )?;
        state.params.validate()?;
        if state.params.dim != pool.dim() || state.params.num_classes != pool.num_classes() {
            return Err(Error::DimensionMismatch {
                expected: state.params.dim,
                actual: pool.dim(),
            });
        }
        if let Some(id) = state
            .pending_query
            .iter()
            .chain(state.labels.iter().map(|r| &r.sample_id))
            .find(|id| !pool.contains(**id))
        {
            return Err(Error::UnknownSample(*id));
        }
        Ok(Session { state, pool, holdout })
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn into_state(self) -> SessionState {
        self.state
    }

    pub fn pool(&self) -> &Dataset {
        &self.pool
    }

    pub fn holdout(&self) -> &Dataset {
        &self.holdout
    }

    pub fn is_complete(&self) -> bool {
        self.state.status == SessionStatus::Complete
    }

    /// Checks that `answers` exactly cover the pending batch with valid labels.
    pub fn validate_answers(&self, answers: &[(u64, ClassId)]) -> Result<()> {
        if self.is_complete() {
            return Err(Error::SessionComplete);
        }
        let pending: HashSet<u64> = self.state.pending_query.iter().copied().collect();
        let mut seen = HashSet::with_capacity(answers.len());
        for &(id, label) in answers {
            if !self.pool.contains(id) {
                return Err(Error::UnknownSample(id));
            }
            if !pending.contains(&id) {
                return Err(Error::NotPending(id));
            }
            if !seen.insert(id) {
                return Err(Error::DuplicateAnswer(id));
            }
            ClassId::checked(label.index(), self.pool.num_classes())?;
        }
        if seen.len() != pending.len() {
            return Err(Error::MissingAnswers(pending.len() - seen.len()));
        }
        Ok(())
    }

    /// Applies a full answer set for the pending batch, fine-tunes, and
    /// selects the next batch. On any error the session is unchanged.
    pub fn submit_labels(&mut self, answers: &[(u64, ClassId)], source: LabelSource) -> Result<()> {
        self.validate_answers(answers)?;
        let by_id: HashMap<u64, ClassId> = answers.iter().copied().collect();
        let mut next = self.state.clone();
        let round = next.current_round + 1;
        for id in &next.pending_query {
            next.labels.push(LabelRecord {
                sample_id: *id,
                label: by_id[id],
                source,
                round,
            });
        }
        next.pending_query.clear();
        next.status = SessionStatus::Training;

        let config = &next.config;
        if config.retrain_from_scratch {
            let (params, opt) = fresh_model(config, &self.pool)?;
            next.params = params;
            next.opt = opt;
        }
        let data: Vec<Labeled<'_>> = next
            .labels
            .iter()
            .filter(|r| r.counts_against_budget())
            .map(|r| {
                (
                    self.pool.get(r.sample_id).expect("validated id").features.as_slice(),
                    r.label,
                )
            })
            .collect();
        train(
            &mut next.params,
            &mut next.opt,
            &data,
            &config.schedule.with_epochs(config.round_epochs()),
            &config.weighting,
            seed::derive(config.seed, tag::ROUND_TRAIN + round as u64),
        )?;

        next.current_round = round;
        let labeled_count = next.budget_labels();
        next.history.push(round_metrics(
            &next.params,
            &self.pool,
            &self.holdout,
            round,
            labeled_count,
        )?);
        if round < next.plan.rounds {
            let quota = next.plan.per_round[round];
            next.pending_query = select(
                &next.config,
                &next.params,
                &self.pool,
                round,
                quota,
                &next.labeled_ids(),
            )?;
            next.status = SessionStatus::AwaitingLabels;
        } else {
            next.status = SessionStatus::Complete;
        }
        self.state = next;
        Ok(())
    }

    /// Answers the pending batch from `oracle`.
    pub fn answer_with(&mut self, oracle: &dyn Oracle) -> Result<()> {
        let answers = self
            .state
            .pending_query
            .iter()
            .map(|&id| oracle.label_of(id).map(|label| (id, label)))
            .collect::<Result<Vec<_>>>()?;
        self.submit_labels(&answers, oracle.source())
    }

    pub fn run_to_completion(&mut self, oracle: &dyn Oracle) -> Result<()> {
        while !self.is_complete() {
            self.answer_with(oracle)?;
        }
        Ok(())
    }
}

fn fresh_model(config: &SessionConfig, pool: &Dataset) -> Result<(ClassifierParams, OptimizerState)> {
    let params = ClassifierParams::init(
        config.architecture,
        pool.dim(),
        pool.num_classes(),
        seed::derive(config.seed, tag::INIT),
    )?;
    let opt = OptimizerState::new(&params, config.optimizer);
    Ok((params, opt))
}

fn round_metrics(
    params: &ClassifierParams,
    pool: &Dataset,
    holdout: &Dataset,
    round: usize,
    labeled_count: usize,
) -> Result<RoundMetrics> {
    let probs = predict_all(params, pool)?;
    let mean_pool_uncertainty = probs.iter().map(uncertainty).sum::<f64>() / probs.len() as f64;
    Ok(RoundMetrics {
        round,
        labeled_count,
        holdout_accuracy: accuracy(params, holdout)?,
        mean_pool_uncertainty,
    })
}

/// Picks the next `quota` ids under the configured selector.
fn select(
    config: &SessionConfig,
    params: &ClassifierParams,
    pool: &Dataset,
    round: usize,
    quota: usize,
    labeled: &HashSet<u64>,
) -> Result<Vec<u64>> {
    let probs = predict_all(params, pool)?;
    match config.selector {
        Selector::LeastConfidence => {
            let scores: Vec<UncertaintyScore> = pool
                .samples()
                .iter()
                .zip(&probs)
                .map(|(s, p)| UncertaintyScore {
                    sample_id: s.id,
                    score: uncertainty(p),
                })
                .collect();
            select_top(&scores, quota, labeled)
        }
        kind => {
            let pairs: Vec<_> = pool.ids().zip(probs).collect();
            baseline_select(
                kind,
                &pairs,
                quota,
                labeled,
                seed::derive(config.seed, tag::ROUND_SELECT + round as u64),
            )
        }
    }
}

/// Result of a session driven to completion by a simulated oracle.
#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub params: ClassifierParams,
    pub state: SessionState,
    pub history: Vec<RoundMetrics>,
    pub pool: Dataset,
    pub holdout: Dataset,
}

pub fn run_session(config: SessionConfig, dataset: &Dataset) -> Result<SessionOutcome> {
    let session = Session::start("sim", config, dataset)?;
    finish(session, dataset)
}

pub fn run_session_split(config: SessionConfig, pool: Dataset, holdout: Dataset) -> Result<SessionOutcome> {
    let session = Session::start_with_split("sim", config, pool.clone(), holdout)?;
    finish(session, &pool)
}

fn finish(mut session: Session, truth: &Dataset) -> Result<SessionOutcome> {
    session.run_to_completion(&SimulatedOracle::new(truth))?;
    let Session { state, pool, holdout } = session;
    Ok(SessionOutcome {
        params: state.params.clone(),
        history: state.history.clone(),
        state,
        pool,
        holdout,
    })
}
