//! Run configuration (TOML).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub data: Option<DataSection>,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub bootstrap: BootstrapSection,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    /// Root seed for every random stream.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Family name with optional parameter, e.g. `gamma` or `cv-normal(0.3)`.
    pub family: String,
    pub mean_link: String,
    #[serde(default = "default_disp_link")]
    pub dispersion_link: String,
    /// Mean predictor, e.g. `b0 + b1*x1 + x2^b2`.
    pub mean: String,
    /// Precision predictor; omitted for families with fixed precision.
    #[serde(default)]
    pub dispersion: Option<String>,
    /// Optional list of parameter names; when present every predictor
    /// identifier must be either a bound column or one of these.
    #[serde(default)]
    pub parameters: Option<Vec<String>>,
}

fn default_disp_link() -> String {
    "log".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    pub response: String,
    /// Predictor identifier -> column name. When absent, every column other
    /// than the response is bound under its own name.
    #[serde(default)]
    pub columns: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    #[serde(default = "default_alphas")]
    pub alpha: Vec<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_score_tol")]
    pub score_tol: f64,
    #[serde(default)]
    pub update: Option<String>,
}

fn default_alphas() -> Vec<f64> {
    vec![0.05]
}

fn default_max_iter() -> usize {
    100
}

fn default_score_tol() -> f64 {
    1e-8
}

impl Default for FitSection {
    fn default() -> Self {
        FitSection {
            alpha: default_alphas(),
            max_iter: default_max_iter(),
            score_tol: default_score_tol(),
            update: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSection {
    #[serde(default = "default_scheme")]
    pub scheme: String,
    #[serde(default = "default_b", rename = "B")]
    pub b: usize,
    #[serde(default = "default_refit")]
    pub refit_policy: String,
}

fn default_scheme() -> String {
    "parametric".into()
}

fn default_b() -> usize {
    200
}

fn default_refit() -> String {
    "skip-nonconverged".into()
}

impl Default for BootstrapSection {
    fn default() -> Self {
        BootstrapSection {
            scheme: default_scheme(),
            b: default_b(),
            refit_policy: default_refit(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_b")]
    pub bootstrap_b: usize,
    pub true_params: Vec<f64>,
    /// Covariate names used by the predictors.
    pub covariates: Vec<String>,
    /// `uniform01` or a path to a delimited file with one column per
    /// covariate.
    #[serde(default = "default_law")]
    pub covariate_law: String,
    #[serde(default = "default_study_alphas")]
    pub alphas: Vec<f64>,
    /// Where to write the delimited table; defaults to the report path with
    /// a `.tsv` extension.
    #[serde(default)]
    pub table: Option<PathBuf>,
}

fn default_replications() -> usize {
    2000
}

fn default_law() -> String {
    "uniform01".into()
}

fn default_study_alphas() -> Vec<f64> {
    vec![0.10, 0.05, 0.01]
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        RunConfig::parse(&text, &base)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
