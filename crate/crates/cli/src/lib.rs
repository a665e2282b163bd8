//! Batch front end: fit, bias-correct, bootstrap and simulate from a TOML
//! configuration, writing JSON reports.
//!
//! Exit codes: 0 success, 1 i/o failure, 2 configuration error (including
//! invalid command-line values), 3 data error, 4 non-convergence.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::commands::Overrides;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::ReportFile;

#[derive(Debug, Parser)]
#[command(name = "dispmod", version, about = "Dispersion models with dispersion covariates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Data file; overrides data.path.
    #[arg(long, global = true, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Report file; standard output when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads; falls back to the DISPMOD_THREADS environment variable.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Comma-separated interval alphas, e.g. 0.1,0.05.
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    #[arg(long = "boot-B", global = true, value_name = "N")]
    pub boot_b: Option<usize>,
    #[arg(long, global = true, value_parser = ["parametric", "nonparametric"])]
    pub boot_scheme: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Maximum-likelihood fit with Wald intervals.
    Fit,
    /// Fit plus analytic second-order bias corrections.
    Bias,
    /// Fit plus bootstrap bias estimate and corrected estimates.
    Bootstrap,
    /// Monte Carlo study of the estimators.
    Simulate,
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            data: self.data.clone(),
            seed: self.seed,
            threads: self.threads,
            alpha: self.alpha.clone(),
            boot_b: self.boot_b,
            boot_scheme: self.boot_scheme.clone(),
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Executes one subcommand.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let cfg = RunConfig::load(path)?;
    let ov = cli.overrides();
    let report = match cli.command {
        Command::Fit => commands::cmd_fit(&cfg, &ov)?,
        Command::Bias => commands::cmd_bias(&cfg, &ov)?,
        Command::Bootstrap => commands::cmd_bootstrap(&cfg, &ov)?,
        Command::Simulate => {
            let (report, table) = commands::cmd_simulate(&cfg, &ov)?;
            let table_path = cfg
                .simulate
                .as_ref()
                .and_then(|s| s.table.as_ref().map(|t| cfg.resolve(t)))
                .or_else(|| cli.out.as_ref().map(|o| o.with_extension("tsv")));
            if let Some(tp) = table_path {
                std::fs::write(&tp, table)?;
            }
            report
        }
    };
    emit(&ReportFile::new(report).to_json()?, cli.out.as_deref())
}
