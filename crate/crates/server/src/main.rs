use std::path::PathBuf;
use std::sync::Arc;

use activelabel::data::SyntheticSpec;
use activelabel_server::{commands, router, Store};
use anyhow::Context;
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "activelabel", version, about = "Uncertainty-driven active labeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the labeling API (and optionally a UI bundle) over HTTP.
    Serve {
        /// Directory of dataset manifests (`*.toml` or `<name>/manifest.toml`).
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Where session state files live.
        #[arg(long, env = "ACTIVELABEL_STATE_DIR")]
        state_dir: PathBuf,
        /// Static files served for paths no API route matches.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
    /// Run one session to completion against the simulated oracle.
    RunSim {
        /// Session config (TOML, or JSON by extension).
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a (method x budget x trial) grid and write report tables.
    Experiment {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic Gaussian-mixture dataset.
    GenData {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        per_class: usize,
        #[arg(long)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Serve {
            data_dir,
            port,
            host,
            state_dir,
            ui_dir,
        } => serve(data_dir, &host, port, state_dir, ui_dir),
        Command::RunSim { config, out } => {
            let outcome = commands::run_sim(&config, &out)?;
            println!("round,labeled_count,holdout_accuracy,mean_pool_uncertainty");
            for m in std::iter::once(&outcome.state.initial).chain(&outcome.history) {
                println!(
                    "{},{},{:.4},{:.4}",
                    m.round, m.labeled_count, m.holdout_accuracy, m.mean_pool_uncertainty
                );
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Experiment { grid, out } => {
            let report = commands::experiment(&grid, &out)?;
            println!("method,budget,trials,mean_accuracy,mean_divergence");
            for s in report.summary() {
                println!(
                    "{},{},{},{:.4},{:.5}",
                    s.method, s.budget, s.trials, s.mean_accuracy, s.mean_divergence
                );
            }
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::GenData {
            k,
            dim,
            per_class,
            separation,
            seed,
            out,
        } => {
            let spec = SyntheticSpec {
                k,
                dim,
                per_class,
                separation,
                seed,
            };
            let manifest = commands::gen_data(&spec, &out)?;
            println!("wrote {}", manifest.display());
            Ok(())
        }
    }
}

fn serve(data_dir: PathBuf, host: &str, port: u16, state_dir: PathBuf, ui_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let store = Arc::new(Store::open(&data_dir, &state_dir)?);
    let app = router(store, ui_dir.as_deref());
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .with_context(|| format!("binding {host}:{port}"))?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
