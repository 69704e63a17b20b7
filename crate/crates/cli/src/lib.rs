//! Command-line pipeline: ingest prices, detect turmoil on the benchmark,
//! run diagnostic tests and fit EGARCH-M models per target index.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod pipeline;
pub mod seeds;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use crate::config::{Overrides, PipelineConfig, Window};
use crate::pipeline::StageOutcome;

#[derive(Debug, Parser)]
#[command(name = "turmoil", version, about = "Turmoil detection and EGARCH-M impact estimation for index returns")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Pipeline configuration (TOML).
    #[arg(long, global = true, default_value = "turmoil.toml")]
    pub config: PathBuf,
    /// Output directory, overrides `output_dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Mixture components for regime detection.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub adf_max_lag: Option<usize>,
    #[arg(long = "archlm-lags", global = true)]
    pub arch_lm_lags: Option<usize>,
    /// Inclusive return-date window, `START:END` with either side optional.
    #[arg(long, global = true, value_parser = parse_window)]
    pub window: Option<Window>,
}

fn parse_window(s: &str) -> Result<Window, String> {
    Window::parse(s).map_err(|e| format!("{e:#}"))
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Load price CSVs, write returns and summary statistics.
    Ingest,
    /// Fit the mixture on the benchmark and write the turmoil dummy.
    Detect,
    /// Jarque-Bera, ADF and ARCH-LM tests per target.
    Tests,
    /// EGARCH-M fits per target.
    Fit,
    /// All stages in order.
    RunAll,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            output_dir: self.out.clone(),
            seed: self.seed,
            k: self.k,
            adf_max_lag: self.adf_max_lag,
            arch_lm_lags: self.arch_lm_lags,
            window: self.window,
        }
    }

    pub fn load_config(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        cfg.apply(&self.overrides());
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run_command(command: Command, cfg: &PipelineConfig) -> Result<StageOutcome> {
    match command {
        Command::Ingest => pipeline::ingest(cfg),
        Command::Detect => pipeline::detect(cfg),
        Command::Tests => pipeline::tests(cfg),
        Command::Fit => pipeline::fit(cfg),
        Command::RunAll => pipeline::run_all(cfg),
    }
}

/// Run a parsed command line, returning the process exit code:
/// 0 on success, 2 when some indices failed, 1 on a fatal error.
pub fn run(cli: &Cli) -> i32 {
    let result = cli.load_config().and_then(|cfg| run_command(cli.command, &cfg));
    match result {
        Ok(outcome) => {
            if !outcome.failed.is_empty() {
                log::warn!("failed indices: {}", outcome.failed.join(", "));
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
