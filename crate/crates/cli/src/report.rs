//! Structured report files (JSON) and their reader.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Bumped whenever a field is renamed, removed or changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub tool_version: String,
    #[serde(flatten)]
    pub report: Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Report {
    Fit(FitReport),
    Bias(BiasReport),
    Bootstrap(BootstrapReport),
    Simulate(SimulateReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub family: String,
    pub mean_link: String,
    pub dispersion_link: String,
    pub mean: String,
    pub dispersion: Option<String>,
    pub parameters: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intervals {
    /// Nominal coverage `1 - alpha`.
    pub level: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: ModelInfo,
    pub n: usize,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub intervals: Vec<Intervals>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub score_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedValues {
    pub mu_hat: Vec<f64>,
    pub phi_hat: Vec<f64>,
    pub b_mu: Vec<f64>,
    pub b_phi: Vec<f64>,
    pub mu_tilde: Vec<f64>,
    pub phi_tilde: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub fit: FitReport,
    pub b_beta: Vec<f64>,
    pub b1_beta: Vec<f64>,
    pub b2_beta: Vec<f64>,
    pub b_beta_regression: Vec<f64>,
    pub b_theta: Vec<f64>,
    pub q1_theta: Vec<f64>,
    pub q2_theta: Vec<f64>,
    pub b_theta_regression: Vec<f64>,
    /// Largest absolute difference between the direct and regression forms.
    pub max_form_discrepancy: f64,
    pub corrected: Vec<f64>,
    /// Wald intervals at the corrected estimate, using the information there.
    /// Empty when that information cannot be evaluated.
    pub corrected_intervals: Vec<Intervals>,
    pub fitted: FittedValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub fit: FitReport,
    pub scheme: String,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    pub refit_policy: String,
    pub zeta_star_mean: Vec<f64>,
    pub zeta_star_sd: Vec<f64>,
    pub bias_hat: Vec<f64>,
    pub zeta_bar: Vec<f64>,
    pub replicates_used: usize,
    pub nonconverged: usize,
    pub corrected_intervals: Vec<Intervals>,
    pub fitted: FittedValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub estimator: String,
    pub parameter: String,
    pub truth: f64,
    pub mean: Option<f64>,
    pub bias: Option<f64>,
    pub variance: Option<f64>,
    pub mse: Option<f64>,
    pub coverage: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub model: ModelInfo,
    pub n: usize,
    pub replications: usize,
    pub bootstrap_b: usize,
    pub seed: u64,
    pub truth: Vec<f64>,
    pub levels: Vec<f64>,
    pub covariates: Vec<Vec<f64>>,
    pub completed: usize,
    pub fit_failures: usize,
    pub estimator_failures: BTreeMap<String, usize>,
    pub interval_failures: BTreeMap<String, usize>,
    pub bootstrap_refits_dropped: usize,
    pub rows: Vec<StudyRow>,
}

/// `Some(v)` for finite values; JSON has no representation for NaN.
pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl ReportFile {
    pub fn new(report: Report) -> Self {
        ReportFile {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            report,
        }
    }

    /// Canonical serialization: pretty JSON, fields in declaration order,
    /// shortest round-trip float formatting, trailing newline.
    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Data(format!("report is not valid JSON: {e}")))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => {
                return Err(CliError::Data(format!(
                    "report schema version {v} is not supported (expected {SCHEMA_VERSION})"
                )))
            }
            None => return Err(CliError::Data("report has no schema_version".into())),
        }
        serde_json::from_value(value).map_err(|e| CliError::Data(format!("malformed report: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        ReportFile::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}
