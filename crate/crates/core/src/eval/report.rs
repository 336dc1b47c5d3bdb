//! Experiment report tables.
//!
//! `report.csv` holds one row per (method, budget, trial); `summary.csv` the
//! per-(method, budget) mean and sample variance; `plot.csv` the same curves
//! as x = budget, y = mean accuracy, error = standard deviation.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_HEADER: &str = "method,budget,trial,seed,accuracy,divergence,runtime_s,status";
pub const SUMMARY_HEADER: &str = "method,budget,trials,mean_accuracy,var_accuracy,mean_divergence,var_divergence";
pub const PLOT_HEADER: &str = "method,budget,mean_accuracy,std_accuracy";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub budget: usize,
    pub trial: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub divergence: f64,
    pub runtime_s: f64,
    /// `ok`, or `failed: <reason>` on the marker row of an aborted run.
    pub status: String,
}

impl ReportRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub budget: usize,
    pub trials: usize,
    pub mean_accuracy: f64,
    pub var_accuracy: f64,
    pub mean_divergence: f64,
    pub var_divergence: f64,
}

#[derive(Serialize)]
struct PlotRow<'a> {
    method: &'a str,
    budget: usize,
    mean_accuracy: f64,
    std_accuracy: f64,
}

/// Mean and sample variance (`n - 1` denominator, 0 for a single value).
fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    /// Method names in grid order.
    pub methods: Vec<String>,
}

impl ExperimentReport {
    pub fn ok_rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.is_ok())
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut groups: BTreeMap<(usize, usize), Vec<&ReportRow>> = BTreeMap::new();
        for row in self.ok_rows() {
            let m = self.methods.iter().position(|m| *m == row.method).unwrap_or(usize::MAX);
            groups.entry((m, row.budget)).or_default().push(row);
        }
        groups
            .into_values()
            .map(|rows| {
                let acc: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
                let div: Vec<f64> = rows.iter().map(|r| r.divergence).collect();
                let (mean_accuracy, var_accuracy) = mean_var(&acc);
                let (mean_divergence, var_divergence) = mean_var(&div);
                SummaryRow {
                    method: rows[0].method.clone(),
                    budget: rows[0].budget,
                    trials: rows.len(),
                    mean_accuracy,
                    var_accuracy,
                    mean_divergence,
                    var_divergence,
                }
            })
            .collect()
    }

    pub fn summary_for(&self, method: &str, budget: usize) -> Option<SummaryRow> {
        self.summary()
            .into_iter()
            .find(|s| s.method == method && s.budget == budget)
    }

    /// Accuracy pairs of two methods matched on (budget, trial).
    pub fn paired_accuracy(&self, first: &str, second: &str) -> Vec<(f64, f64)> {
        let lookup: BTreeMap<(usize, usize), f64> = self
            .ok_rows()
            .filter(|r| r.method == second)
            .map(|r| ((r.budget, r.trial), r.accuracy))
            .collect();
        self.ok_rows()
            .filter(|r| r.method == first)
            .filter_map(|r| lookup.get(&(r.budget, r.trial)).map(|&b| (r.accuracy, b)))
            .collect()
    }

    /// Writes `report.csv`, `summary.csv` and `plot.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut w = csv::Writer::from_path(dir.join("report.csv"))?;
        if self.rows.is_empty() {
            w.write_record(REPORT_HEADER.split(','))?;
        }
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(dir, e))?;

        let summary = self.summary();
        let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
        if summary.is_empty() {
            w.write_record(SUMMARY_HEADER.split(','))?;
        }
        for row in &summary {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(dir, e))?;

        let mut w = csv::Writer::from_path(dir.join("plot.csv"))?;
        if summary.is_empty() {
            w.write_record(PLOT_HEADER.split(','))?;
        }
        for s in &summary {
            w.serialize(PlotRow {
                method: &s.method,
                budget: s.budget,
                mean_accuracy: s.mean_accuracy,
                std_accuracy: s.var_accuracy.sqrt(),
            })?;
        }
        w.flush().map_err(|e| Error::io(dir, e))?;
        Ok(())
    }

    pub fn read_rows(path: &Path) -> Result<Vec<ReportRow>> {
        let mut reader = csv::Reader::from_path(path)?;
        Ok(reader
            .deserialize()
            .collect::<std::result::Result<Vec<ReportRow>, _>>()?)
    }
}
