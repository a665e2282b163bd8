//! Bootstrap bias estimates and constant-bias-correcting estimators.

use std::ops::Range;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{substream, Execution};
use crate::fit::{fit_mle_with, FitOptions, FitResult};
use crate::model::{mu_phi, Dataset, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BootstrapScheme {
    /// Responses drawn from the fitted distribution of each row; covariates
    /// kept fixed.
    ParametricFixedX,
    /// Whole rows resampled with replacement.
    NonparametricRandomX,
}

impl std::str::FromStr for BootstrapScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "parametric" | "parametric-fixed-x" => Ok(BootstrapScheme::ParametricFixedX),
            "nonparametric" | "nonparametric-random-x" => Ok(BootstrapScheme::NonparametricRandomX),
            other => Err(Error::InvalidConfig(format!(
                "unknown bootstrap scheme '{other}' (expected parametric or nonparametric)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefitPolicy {
    /// Failed replicate fits are dropped and counted.
    #[default]
    SkipNonconverged,
    /// The first failed replicate fit aborts the run.
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapPlan {
    pub scheme: BootstrapScheme,
    pub b: usize,
    pub seed: u64,
    pub refit_policy: RefitPolicy,
    #[serde(skip, default)]
    pub execution: Execution,
    #[serde(skip, default)]
    pub fit_options: FitOptions,
}

impl BootstrapPlan {
    /// Replicate fits start only from the base estimate (no restarts).
    pub fn new(scheme: BootstrapScheme, b: usize, seed: u64) -> Self {
        BootstrapPlan {
            scheme,
            b,
            seed,
            refit_policy: RefitPolicy::default(),
            execution: Execution::default(),
            fit_options: FitOptions {
                restarts: false,
                ..FitOptions::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return Err(Error::InvalidConfig("bootstrap replicate count B must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// Mean of the replicate estimates.
    pub zeta_star_mean: Vec<f64>,
    /// Standard deviation of the replicate estimates (zero with one replicate).
    pub zeta_star_sd: Vec<f64>,
    /// `zeta_star_mean - zeta_hat`
    pub bias_hat: Vec<f64>,
    /// `2 zeta_hat - zeta_star_mean`
    pub zeta_bar: Vec<f64>,
    pub replicates_used: usize,
    pub nonconverged: usize,
}

/// One replicate estimate, or `None` when its fit failed.
pub type Replicate = Option<Vec<f64>>;

fn check_inputs(model: &ModelSpec, fit: &FitResult, plan: &BootstrapPlan) -> Result<()> {
    plan.validate()?;
    if !fit.converged {
        return Err(Error::NonConvergence {
            iterations: fit.iterations,
            score_norm: fit.score_norm,
        });
    }
    if plan.scheme == BootstrapScheme::ParametricFixedX && !model.family.is_samplable() {
        return Err(Error::Unsupported(format!(
            "family {} has no sampler; the parametric bootstrap needs one",
            model.family
        )));
    }
    Ok(())
}

/// Replicate estimates for the indices in `range`. Replicate `b` always uses
/// stream `b` of the plan seed, so any partition of `0..B` yields the same
/// estimates.
pub fn bootstrap_replicates(
    model: &ModelSpec,
    data: &Dataset,
    fit: &FitResult,
    plan: &BootstrapPlan,
    range: Range<usize>,
) -> Result<Vec<Replicate>> {
    check_inputs(model, fit, plan)?;
    let (mu, phi) = mu_phi(model, data, &fit.beta, &fit.theta)?;
    let n = data.n();
    let draw = |rng: &mut ChaCha8Rng| -> Result<Dataset> {
        match plan.scheme {
            BootstrapScheme::ParametricFixedX => {
                let y = (0..n).map(|i| model.family.sample(mu[i], phi[i], rng)).collect::<Result<Vec<_>>>()?;
                Ok(data.with_response(y))
            }
            BootstrapScheme::NonparametricRandomX => {
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                Ok(data.select_rows(&idx))
            }
        }
    };
    run_replicates(model, fit, plan, range, &draw)
}

fn run_replicates(
    model: &ModelSpec,
    fit: &FitResult,
    plan: &BootstrapPlan,
    range: Range<usize>,
    draw: &(dyn Fn(&mut ChaCha8Rng) -> Result<Dataset> + Sync),
) -> Result<Vec<Replicate>> {
    let outcomes = plan.execution.map_range(range.clone(), |b| {
        let mut rng = substream(plan.seed, b as u64);
        let sample = draw(&mut rng)?;
        fit_mle_with(model, &sample, Some((&fit.beta, &fit.theta)), &plan.fit_options)
    });
    let mut out = Vec::with_capacity(outcomes.len());
    for (b, outcome) in range.zip(outcomes) {
        match outcome {
            Ok(f) if f.converged => out.push(Some(f.zeta())),
            Ok(f) => {
                if plan.refit_policy == RefitPolicy::Error {
                    log::error!("bootstrap replicate {b} did not converge");
                    return Err(Error::NonConvergence {
                        iterations: f.iterations,
                        score_norm: f.score_norm,
                    });
                }
                out.push(None);
            }
            Err(e) => {
                if plan.refit_policy == RefitPolicy::Error {
                    log::error!("bootstrap replicate {b} failed");
                    return Err(e);
                }
                log::debug!("bootstrap replicate {b} failed: {e}");
                out.push(None);
            }
        }
    }
    Ok(out)
}

/// Aggregates replicate estimates in index order.
pub fn summarize(zeta_hat: &[f64], replicates: &[Replicate]) -> Result<BootstrapResult> {
    let used: Vec<&Vec<f64>> = replicates.iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::AllReplicatesFailed {
            attempted: replicates.len(),
        });
    }
    let k = zeta_hat.len();
    let count = used.len() as f64;
    let mut mean = vec![0.0; k];
    for z in &used {
        for (m, v) in mean.iter_mut().zip(z.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let sd = (0..k)
        .map(|j| {
            if used.len() < 2 {
                return 0.0;
            }
            let ss: f64 = used.iter().map(|z| (z[j] - mean[j]).powi(2)).sum();
            (ss / (count - 1.0)).sqrt()
        })
        .collect();
    Ok(BootstrapResult {
        bias_hat: mean.iter().zip(zeta_hat).map(|(m, z)| m - z).collect(),
        zeta_bar: mean.iter().zip(zeta_hat).map(|(m, z)| 2.0 * z - m).collect(),
        zeta_star_mean: mean,
        zeta_star_sd: sd,
        replicates_used: used.len(),
        nonconverged: replicates.len() - used.len(),
    })
}

/// Bootstrap bias of the MLE and the corrected estimator `2 zeta_hat -
/// mean(zeta*)`.
pub fn bootstrap_bias(model: &ModelSpec, data: &Dataset, fit: &FitResult, plan: &BootstrapPlan) -> Result<BootstrapResult> {
    let reps = bootstrap_replicates(model, data, fit, plan, 0..plan.b)?;
    summarize(&fit.zeta(), &reps)
}
