//! Budget sweeps over seeded trials.
//!
//! Every trial gets its own seed `base_seed + trial`, its own pool/holdout
//! split and one reference classifier trained on all pool labels. Within a
//! trial every method and budget shares the split and initialization, so
//! results are paired across methods.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_dataset, split_holdout, Dataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::model::{train, AdamWConfig, Architecture, ClassifierParams, Labeled, OptimizerState, TrainSchedule};
use crate::seed;
use crate::session::{run_session_split, SessionConfig};
use crate::strategy::{NormMode, WeightingConfig};

use super::baselines::Selector;
use super::metrics::{accuracy, representativeness_divergence};
use super::report::{ExperimentReport, ReportRow};

mod tag {
    pub const SPLIT: u64 = 11;
    pub const REFERENCE_INIT: u64 = 12;
    pub const REFERENCE_TRAIN: u64 = 13;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic(SyntheticSpec),
    Manifest(PathBuf),
}

impl DatasetSource {
    /// Relative manifest paths resolve against `base`.
    pub fn load(&self, base: Option<&Path>) -> Result<Dataset> {
        match self {
            DatasetSource::Synthetic(spec) => spec.generate(),
            DatasetSource::Manifest(path) => match base {
                Some(dir) if path.is_relative() => load_dataset(&dir.join(path)),
                _ => load_dataset(path),
            },
        }
    }
}

fn yes() -> bool {
    true
}

/// One curve of an experiment: a query rule plus a training loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Method {
    pub name: String,
    #[serde(default)]
    pub selector: Selector,
    /// Uncertainty-weighted loss (true) or plain cross-entropy (false).
    #[serde(default = "yes")]
    pub weighting: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm_mode: Option<NormMode>,
}

impl Method {
    pub fn new(name: impl Into<String>, selector: Selector, weighting: bool) -> Self {
        Method {
            name: name.into(),
            selector,
            weighting,
            alpha: None,
            norm_mode: None,
        }
    }

    /// Least confidence with the uncertainty-weighted loss.
    pub fn active() -> Self {
        Method::new("active", Selector::LeastConfidence, true)
    }

    /// Least confidence with plain cross-entropy.
    pub fn active_ce() -> Self {
        Method::new("ce", Selector::LeastConfidence, false)
    }

    pub fn baseline(selector: Selector) -> Self {
        let name = match selector {
            Selector::LeastConfidence => "least_confidence",
            Selector::Random => "random",
            Selector::Entropy => "entropy",
            Selector::Margin => "margin",
        };
        Method::new(name, selector, false)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self.name = format!("{}-alpha{alpha}", self.name);
        self
    }

    /// `active`, `ce`, `random`, `entropy`, `margin`, `least_confidence`.
    pub fn preset(name: &str) -> Option<Self> {
        Some(match name {
            "active" => Method::active(),
            "ce" => Method::active_ce(),
            "random" => Method::baseline(Selector::Random),
            "entropy" => Method::baseline(Selector::Entropy),
            "margin" => Method::baseline(Selector::Margin),
            "least_confidence" => Method::baseline(Selector::LeastConfidence),
            _ => return None,
        })
    }
}

fn default_holdout() -> f64 {
    0.2
}

fn default_warmup() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub methods: Vec<Method>,
    pub budgets: Vec<usize>,
    pub rounds: usize,
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    pub dataset: DatasetSource,
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    #[serde(default)]
    pub schedule: TrainSchedule,
    #[serde(default)]
    pub epochs_per_round: Option<usize>,
    /// Epochs for the all-labels reference model; `schedule.epochs` when unset.
    #[serde(default)]
    pub reference_epochs: Option<usize>,
    #[serde(default)]
    pub weighting: WeightingConfig,
    #[serde(default = "default_warmup")]
    pub warmup_epochs: usize,
    #[serde(default)]
    pub architecture: Architecture,
    #[serde(default)]
    pub optimizer: AdamWConfig,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.budgets.is_empty() || self.trials == 0 {
            return Err(Error::InvalidParameter(
                "grid needs at least one method, budget and trial".into(),
            ));
        }
        let mut names: Vec<&str> = self.methods.iter().map(|m| m.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("method names must be unique".into()));
        }
        let mut budgets = self.budgets.clone();
        budgets.sort_unstable();
        if budgets.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("budgets must be unique".into()));
        }
        self.schedule.validate()?;
        self.weighting.validate()?;
        for m in &self.methods {
            self.method_weighting(m).validate()?;
        }
        for &b in &self.budgets {
            crate::data::plan_rounds(b, self.rounds)?;
        }
        Ok(())
    }

    fn method_weighting(&self, method: &Method) -> WeightingConfig {
        WeightingConfig {
            alpha: method.alpha.unwrap_or(self.weighting.alpha),
            norm_mode: method.norm_mode.unwrap_or(self.weighting.norm_mode),
        }
    }

    /// Session configuration for one cell of the grid.
    pub fn session_config(&self, method: &Method, budget: usize, trial_seed: u64) -> SessionConfig {
        let mut cfg = SessionConfig::new(method.name.clone(), budget, self.rounds, trial_seed);
        cfg.schedule = TrainSchedule {
            weighting_enabled: method.weighting,
            ..self.schedule.clone()
        };
        cfg.epochs_per_round = self.epochs_per_round;
        cfg.weighting = self.method_weighting(method);
        cfg.warmup_epochs = self.warmup_epochs;
        cfg.architecture = self.architecture;
        cfg.selector = method.selector;
        cfg.holdout_fraction = self.holdout_fraction;
        cfg.optimizer = self.optimizer;
        cfg
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.base_seed.wrapping_add(trial as u64)
    }
}

/// Pool/holdout split and the all-labels reference model of one trial.
pub struct TrialSetup {
    pub seed: u64,
    pub pool: Dataset,
    pub holdout: Dataset,
    pub reference: ClassifierParams,
}

pub fn prepare_trial(grid: &ExperimentGrid, dataset: &Dataset, trial: usize) -> Result<TrialSetup> {
    let trial_seed = grid.trial_seed(trial);
    let (pool, holdout) = split_holdout(dataset, grid.holdout_fraction, seed::derive(trial_seed, tag::SPLIT))?;
    let mut reference = ClassifierParams::init(
        grid.architecture,
        pool.dim(),
        pool.num_classes(),
        seed::derive(trial_seed, tag::REFERENCE_INIT),
    )?;
    let mut opt = OptimizerState::new(&reference, grid.optimizer);
    let data: Vec<Labeled<'_>> = pool
        .samples()
        .iter()
        .map(|s| (s.features.as_slice(), s.true_label))
        .collect();
    let schedule = TrainSchedule {
        epochs: grid.reference_epochs.unwrap_or(grid.schedule.epochs),
        weighting_enabled: false,
        ..grid.schedule.clone()
    };
    train(
        &mut reference,
        &mut opt,
        &data,
        &schedule,
        &grid.weighting,
        seed::derive(trial_seed, tag::REFERENCE_TRAIN),
    )?;
    Ok(TrialSetup {
        seed: trial_seed,
        pool,
        holdout,
        reference,
    })
}

fn run_cell(
    grid: &ExperimentGrid,
    setup: &TrialSetup,
    method: &Method,
    budget: usize,
    trial: usize,
) -> Result<ReportRow> {
    let started = Instant::now();
    let cfg = grid.session_config(method, budget, setup.seed);
    let outcome = run_session_split(cfg, setup.pool.clone(), setup.holdout.clone())?;
    let accuracy = accuracy(&outcome.params, &setup.holdout)?;
    let divergence = representativeness_divergence(&setup.reference, &outcome.params, &setup.holdout)?;
    Ok(ReportRow {
        method: method.name.clone(),
        budget,
        trial,
        seed: setup.seed,
        accuracy,
        divergence,
        runtime_s: started.elapsed().as_secs_f64(),
        status: "ok".into(),
    })
}

/// Runs every (method, budget, trial) cell and, when `out_dir` is given,
/// writes the report tables there.
///
/// Cells run in parallel; rows are ordered by (method in grid order, budget,
/// trial). If any cell fails, the rows that did complete are written followed
/// by a `failed` marker row, and the first error is returned.
pub fn run_experiment(grid: &ExperimentGrid, dataset: &Dataset, out_dir: Option<&Path>) -> Result<ExperimentReport> {
    grid.validate()?;
    let methods: Vec<String> = grid.methods.iter().map(|m| m.name.clone()).collect();
    let setups: Vec<Result<TrialSetup>> = (0..grid.trials)
        .into_par_iter()
        .map(|t| prepare_trial(grid, dataset, t))
        .collect();
    let setups = match setups.into_iter().collect::<Result<Vec<_>>>() {
        Ok(s) => s,
        Err(e) => {
            flush_failure(out_dir, Vec::new(), methods, "reference", &e)?;
            return Err(e);
        }
    };

    let mut cells = Vec::new();
    for (mi, method) in grid.methods.iter().enumerate() {
        let mut budgets = grid.budgets.clone();
        budgets.sort_unstable();
        for budget in budgets {
            for trial in 0..grid.trials {
                cells.push((mi, method, budget, trial));
            }
        }
    }
    let results: Vec<(String, Result<ReportRow>)> = cells
        .par_iter()
        .map(|&(_, method, budget, trial)| {
            (
                method.name.clone(),
                run_cell(grid, &setups[trial], method, budget, trial),
            )
        })
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    let mut failure = None;
    for (name, result) in results {
        match result {
            Ok(row) => rows.push(row),
            Err(e) if failure.is_none() => failure = Some((name, e)),
            Err(_) => {}
        }
    }
    if let Some((name, e)) = failure {
        flush_failure(out_dir, rows, methods, &name, &e)?;
        return Err(e);
    }
    let report = ExperimentReport { rows, methods };
    if let Some(dir) = out_dir {
        report.write(dir)?;
    }
    Ok(report)
}

fn flush_failure(
    out_dir: Option<&Path>,
    mut rows: Vec<ReportRow>,
    methods: Vec<String>,
    method: &str,
    err: &Error,
) -> Result<()> {
    let Some(dir) = out_dir else { return Ok(()) };
    rows.push(ReportRow {
        method: method.to_string(),
        budget: 0,
        trial: 0,
        seed: 0,
        accuracy: f64::NAN,
        divergence: f64::NAN,
        runtime_s: 0.0,
        status: format!("failed: {err}"),
    });
    ExperimentReport { rows, methods }.write(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_grid() -> ExperimentGrid {
        ExperimentGrid {
            methods: vec![Method::active(), Method::baseline(Selector::Random)],
            budgets: vec![20, 10],
            rounds: 2,
            trials: 2,
            base_seed: 3,
            dataset: DatasetSource::Synthetic(SyntheticSpec {
                k: 3,
                dim: 2,
                per_class: 30,
                separation: 3.0,
                seed: 1,
            }),
            holdout_fraction: 0.2,
            schedule: TrainSchedule {
                epochs: 4,
                ..TrainSchedule::default()
            },
            epochs_per_round: None,
            reference_epochs: None,
            weighting: WeightingConfig::default(),
            warmup_epochs: 1,
            architecture: Architecture::SoftmaxLinear,
            optimizer: AdamWConfig::default(),
        }
    }

    #[test]
    fn rows_are_ordered_and_complete() {
        let grid = tiny_grid();
        let ds = grid.dataset.load(None).unwrap();
        let report = run_experiment(&grid, &ds, None).unwrap();
        let keys: Vec<(String, usize, usize)> = report
            .rows
            .iter()
            .map(|r| (r.method.clone(), r.budget, r.trial))
            .collect();
        assert_eq!(keys.len(), 8);
        assert_eq!(keys[0], ("active".into(), 10, 0));
        assert_eq!(keys[7], ("random".into(), 20, 1));
        assert!(report
            .rows
            .iter()
            .all(|r| (0.0..=1.0).contains(&r.accuracy) && r.divergence >= 0.0));
    }

    #[test]
    fn failures_are_flushed_with_a_marker() {
        let mut grid = tiny_grid();
        grid.budgets = vec![10, 500];
        let ds = grid.dataset.load(None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(run_experiment(&grid, &ds, Some(dir.path())).is_err());
        let rows = ExperimentReport::read_rows(&dir.path().join("report.csv")).unwrap();
        assert_eq!(rows.iter().filter(|r| r.is_ok()).count(), 4);
        assert!(rows.last().unwrap().status.starts_with("failed"));
    }

    #[test]
    fn grid_validation() {
        let mut grid = tiny_grid();
        grid.methods.push(Method::active());
        assert!(grid.validate().is_err());
        let mut grid = tiny_grid();
        grid.budgets = vec![1];
        assert!(grid.validate().is_err());
        let mut grid = tiny_grid();
        grid.methods[0].alpha = Some(-1.0);
        assert!(grid.validate().is_err());
    }

    #[test]
    fn presets() {
        assert_eq!(Method::preset("active").unwrap(), Method::active());
        assert!(!Method::preset("random").unwrap().weighting);
        assert!(Method::preset("nope").is_none());
        assert_eq!(Method::active().with_alpha(2.5).name, "active-alpha2.5");
    }
}
