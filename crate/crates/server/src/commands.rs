//! Batch commands behind the CLI.

use std::fs;
use std::path::{Path, PathBuf};

use activelabel::data::{load_dataset, write_dataset, SyntheticSpec};
use activelabel::eval::{run_experiment, ExperimentGrid, ExperimentReport};
use activelabel::model::Checkpoint;
use activelabel::session::{run_session, RoundMetrics, SessionConfig, SessionOutcome};
use anyhow::Context;
use serde::de::DeserializeOwned;

use crate::export::{export_rows, write_csv};

/// Parses JSON when the extension is `.json`, TOML otherwise.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = if path.extension().and_then(|e| e.to_str()) == Some("json") {
        serde_json::from_str(&text).map_err(anyhow::Error::from)
    } else {
        toml::from_str(&text).map_err(anyhow::Error::from)
    };
    parsed.with_context(|| format!("parsing {}", path.display()))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

/// Runs one session against the simulated oracle.
///
/// `dataset` in the config is a manifest path, relative to the config file.
/// Writes `session.json`, `checkpoint.json`, `history.csv` and `labeled.csv`
/// into `out`.
pub fn run_sim(config_path: &Path, out: &Path) -> anyhow::Result<SessionOutcome> {
    let config: SessionConfig = read_config(config_path)?;
    let manifest = base_dir(config_path).join(&config.dataset);
    let dataset = load_dataset(&manifest)?;
    let outcome = run_session(config, &dataset)?;

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("session.json"), outcome.state.to_json()?)?;
    Checkpoint::new(outcome.state.params.clone(), outcome.state.opt.clone()).save(&out.join("checkpoint.json"))?;
    write_history(&out.join("history.csv"), &outcome.state.initial, &outcome.history)?;

    let session = activelabel::session::Session::resume(outcome.state.clone(), &dataset)?;
    let file = fs::File::create(out.join("labeled.csv"))?;
    write_csv(file, dataset.dim(), &export_rows(&session))?;
    Ok(outcome)
}

fn write_history(path: &Path, initial: &RoundMetrics, history: &[RoundMetrics]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["round", "labeled_count", "holdout_accuracy", "mean_pool_uncertainty"])?;
    for m in std::iter::once(initial).chain(history) {
        w.write_record([
            m.round.to_string(),
            m.labeled_count.to_string(),
            m.holdout_accuracy.to_string(),
            m.mean_pool_uncertainty.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs a grid; a manifest dataset path is relative to the grid file.
pub fn experiment(grid_path: &Path, out: &Path) -> anyhow::Result<ExperimentReport> {
    let grid: ExperimentGrid = read_config(grid_path)?;
    let dataset = grid.dataset.load(Some(&base_dir(grid_path)))?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    Ok(run_experiment(&grid, &dataset, Some(out))?)
}

/// Writes a synthetic mixture as `manifest.toml` plus `features.csv`.
pub fn gen_data(spec: &SyntheticSpec, out: &Path) -> anyhow::Result<PathBuf> {
    let dataset = spec.generate()?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    Ok(write_dataset(&dataset, out)?)
}
