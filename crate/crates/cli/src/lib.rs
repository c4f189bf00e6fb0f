//! Batch driver for the `fungen` engine: TOML run configs, the
//! `simulate`/`backtest`/`verify` pipelines and their report files.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod verify;

use std::path::PathBuf;

use thiserror::Error;

pub use commands::{cmd_backtest, cmd_simulate, BacktestRun, BacktestSummary};
pub use config::{GenfunConfig, MarketSource, ModeSelection, RunConfig};
pub use verify::{cmd_verify, Fault, SuiteOutcome, VerifyReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Market(#[from] fungen::marketdata::MarketError),
    #[error(transparent)]
    Sim(#[from] fungen::simulate::SimError),
    #[error(transparent)]
    Lambda(#[from] fungen::lambda::LambdaError),
    #[error(transparent)]
    Engine(#[from] fungen::engine::EngineError),
    #[error(transparent)]
    Diagnostics(#[from] fungen::diagnostics::DiagnosticsError),
    #[error(transparent)]
    Report(#[from] fungen::diagnostics::ReportError),
    #[error("run {run_id} ({mode}): {message}")]
    Backtest { run_id: String, mode: &'static str, message: String },
    #[error("{failed} of {total} runs failed:\n{details}")]
    Batch { failed: usize, total: usize, details: String },
    #[error("verification failed: {0}")]
    Verify(String),
}

impl CliError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Parallelism cap from `FUNGEN_THREADS`; `None` when unset or invalid.
pub fn thread_cap() -> Option<usize> {
    std::env::var("FUNGEN_THREADS").ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}
