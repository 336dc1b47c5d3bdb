//! Measuring what a labeling session produced.

mod baselines;
mod experiment;
mod metrics;
mod report;

pub use baselines::{baseline_select, entropy, margin, Selector};
pub use experiment::{prepare_trial, run_experiment, DatasetSource, ExperimentGrid, Method, TrialSetup};
pub use metrics::{accuracy, representativeness_divergence, sign_test, SignTest};
pub use report::{ExperimentReport, ReportRow, SummaryRow, PLOT_HEADER, REPORT_HEADER, SUMMARY_HEADER};
