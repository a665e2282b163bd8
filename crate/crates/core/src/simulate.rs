//! Monte Carlo comparison of the MLE with its analytic and bootstrap bias
//! corrections: bias, variance, mean squared error and Wald interval coverage.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bias::cox_snell;
use crate::bootstrap::{bootstrap_bias, BootstrapPlan, BootstrapScheme};
use crate::error::{Error, Result};
use crate::exec::{substream, Execution};
use crate::families::Family;
use crate::fit::{fit_mle_with, information_inverse, std_errors, FitOptions};
use crate::links::Link;
use crate::model::{mu_phi, Dataset, ModelSpec};
use crate::specialfns::normal_quantile;

/// Stream index reserved for the covariate draw; replicate `r` uses stream `r`.
const COVARIATE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Mle,
    CoxSnell,
    ParametricBoot,
    NonparametricBoot,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [
        Estimator::Mle,
        Estimator::CoxSnell,
        Estimator::ParametricBoot,
        Estimator::NonparametricBoot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Mle => "mle",
            Estimator::CoxSnell => "cox-snell",
            Estimator::ParametricBoot => "p-boot",
            Estimator::NonparametricBoot => "np-boot",
        }
    }

    fn needs_bootstrap(self) -> bool {
        matches!(self, Estimator::ParametricBoot | Estimator::NonparametricBoot)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovariateLaw {
    /// Independent U(0, 1) draws, made once from the study seed.
    Uniform01,
    /// Covariate rows supplied by the caller.
    Fixed(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub model: ModelSpec,
    /// Covariate names, in the column order of the design rows.
    pub covariates: Vec<String>,
    /// `(beta, theta)` used to generate every replicate.
    pub true_params: Vec<f64>,
    pub n: usize,
    pub replications: usize,
    /// Bootstrap replicates per Monte Carlo replicate; 0 disables both
    /// bootstrap estimators.
    pub bootstrap_b: usize,
    pub covariate_law: CovariateLaw,
    pub seed: u64,
    /// Interval levels are `1 - alpha`.
    pub alphas: Vec<f64>,
    pub execution: Execution,
    pub fit_options: FitOptions,
}

impl StudyConfig {
    /// Reciprocal gamma responses, square-root mean link with predictor
    /// `b0 + b1*x1 + x2^b2`, log precision link with `t0 + t1*x1 + x2^t2`,
    /// truth `(0.5, 1, 2, 1, 2, 3)`, uniform covariates.
    pub fn nonlinear_reciprocal_gamma(n: usize, seed: u64) -> Result<Self> {
        let covariates = vec!["x1".to_string(), "x2".to_string()];
        let model = ModelSpec::from_exprs(
            Family::ReciprocalGamma,
            Link::Sqrt,
            Link::Log,
            "b0 + b1*x1 + x2^b2",
            Some("t0 + t1*x1 + x2^t2"),
            &covariates,
        )?;
        Ok(StudyConfig {
            model,
            covariates,
            true_params: vec![0.5, 1.0, 2.0, 1.0, 2.0, 3.0],
            n,
            replications: 2000,
            bootstrap_b: 200,
            covariate_law: CovariateLaw::Uniform01,
            seed,
            alphas: vec![0.10, 0.05, 0.01],
            execution: Execution::default(),
            fit_options: FitOptions::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.model.p() + self.model.q();
        if self.true_params.len() != k {
            return Err(Error::InvalidConfig(format!(
                "true_params has {} entries, the model has {k} parameters",
                self.true_params.len()
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if self.n < k {
            return Err(Error::Identifiability(format!("n = {} is below the parameter count {k}", self.n)));
        }
        if let Some(a) = self.alphas.iter().find(|&&a| !(a > 0.0 && a < 0.5)) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 0.5), got {a}")));
        }
        if !self.model.family.is_samplable() {
            return Err(Error::Unsupported(format!("family {} has no sampler", self.model.family)));
        }
        if let CovariateLaw::Fixed(rows) = &self.covariate_law {
            if rows.len() != self.n {
                return Err(Error::Dimension(format!("{} covariate rows for n = {}", rows.len(), self.n)));
            }
        }
        Ok(())
    }

    pub fn estimators(&self) -> Vec<Estimator> {
        Estimator::ALL
            .into_iter()
            .filter(|e| self.bootstrap_b > 0 || !e.needs_bootstrap())
            .collect()
    }

    /// The fixed design: covariates only, responses zero.
    pub fn design(&self) -> Result<Dataset> {
        let rows = match &self.covariate_law {
            CovariateLaw::Fixed(rows) => rows.clone(),
            CovariateLaw::Uniform01 => {
                let mut rng = substream(self.seed, COVARIATE_STREAM);
                (0..self.n)
                    .map(|_| (0..self.covariates.len()).map(|_| rng.random::<f64>()).collect())
                    .collect()
            }
        };
        Dataset::new(vec![0.0; self.n], rows, self.covariates.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub parameter: String,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    /// Divisor is the number of completed replicates.
    pub variance: f64,
    pub mse: f64,
    /// Coverage of the Wald interval at each configured level.
    pub coverage: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub n: usize,
    pub replications: usize,
    pub bootstrap_b: usize,
    pub seed: u64,
    pub parameters: Vec<String>,
    pub truth: Vec<f64>,
    pub levels: Vec<f64>,
    pub covariates: Vec<Vec<f64>>,
    /// Replicates in which every estimator was available; all summaries are
    /// over this common set.
    pub completed: usize,
    /// Replicates whose MLE fit failed or did not converge.
    pub fit_failures: usize,
    /// Replicates, among converged fits, in which an estimator could not be
    /// computed.
    pub estimator_failures: BTreeMap<Estimator, usize>,
    /// Completed replicates in which the information at the estimate could
    /// not be evaluated; these intervals count as not covering.
    pub interval_failures: BTreeMap<Estimator, usize>,
    /// Bootstrap refits dropped under the skip policy, summed over replicates.
    pub bootstrap_refits_dropped: usize,
    pub summaries: Vec<EstimatorSummary>,
}

impl StudyReport {
    pub fn summary(&self, estimator: Estimator, parameter: usize) -> Option<&EstimatorSummary> {
        self.summaries
            .iter()
            .filter(|s| s.estimator == estimator)
            .nth(parameter)
    }

    /// Tab-delimited table, one row per estimator and parameter.
    pub fn to_table(&self) -> String {
        let mut out = String::from("estimator\tparameter\ttruth\tmean\tbias\tvariance\tmse");
        for l in &self.levels {
            let _ = write!(out, "\tcoverage_{l}");
        }
        out.push('\n');
        for s in &self.summaries {
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.estimator.name(),
                s.parameter,
                s.truth,
                s.mean,
                s.bias,
                s.variance,
                s.mse
            );
            for c in &s.coverage {
                let _ = write!(out, "\t{c}");
            }
            out.push('\n');
        }
        out
    }
}

/// Point estimate of one estimator in one replicate, with standard errors
/// when the information at the estimate could be evaluated.
type Estimate = Option<(Vec<f64>, Option<Vec<f64>>)>;

enum Replicate {
    FitFailed,
    Done { estimates: Vec<Estimate>, dropped: usize },
}

fn corrected_se(model: &ModelSpec, data: &Dataset, zeta: &[f64]) -> Option<Vec<f64>> {
    let p = model.p();
    let (kb, kt) = information_inverse(model, data, &zeta[..p], &zeta[p..]).ok()?;
    let se = std_errors(&kb, &kt);
    se.iter().all(|v| v.is_finite() && *v > 0.0).then_some(se)
}

fn run_replicate(cfg: &StudyConfig, design: &Dataset, mu: &[f64], phi: &[f64], r: usize) -> Result<Replicate> {
    let model = &cfg.model;
    let mut rng = substream(cfg.seed, r as u64);
    let y = (0..cfg.n)
        .map(|i| model.family.sample(mu[i], phi[i], &mut rng))
        .collect::<Result<Vec<f64>>>()?;
    let boot_seeds: [u64; 2] = [rng.random(), rng.random()];
    let data = design.with_response(y);
    let fit = match fit_mle_with(model, &data, None, &cfg.fit_options) {
        Ok(f) if f.converged => f,
        _ => return Ok(Replicate::FitFailed),
    };
    let mut dropped = 0;
    let estimates = cfg
        .estimators()
        .into_iter()
        .map(|e| {
            let zeta = match e {
                Estimator::Mle => return Some((fit.zeta(), Some(fit.std_errors()))),
                Estimator::CoxSnell => cox_snell(model, &data, &fit).ok()?.zeta_tilde(),
                Estimator::ParametricBoot | Estimator::NonparametricBoot => {
                    let (scheme, seed) = if e == Estimator::ParametricBoot {
                        (BootstrapScheme::ParametricFixedX, boot_seeds[0])
                    } else {
                        (BootstrapScheme::NonparametricRandomX, boot_seeds[1])
                    };
                    let mut plan = BootstrapPlan::new(scheme, cfg.bootstrap_b, seed);
                    plan.execution = Execution::Sequential;
                    plan.fit_options = FitOptions {
                        restarts: false,
                        ..cfg.fit_options
                    };
                    let res = bootstrap_bias(model, &data, &fit, &plan).ok()?;
                    dropped += res.nonconverged;
                    res.zeta_bar
                }
            };
            let se = corrected_se(model, &data, &zeta);
            Some((zeta, se))
        })
        .collect();
    Ok(Replicate::Done { estimates, dropped })
}

/// Runs the study. Each replicate draws responses from its own stream, so the
/// report does not depend on the execution schedule.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let design = cfg.design()?;
    let p = cfg.model.p();
    let (mu, phi) = mu_phi(&cfg.model, &design, &cfg.true_params[..p], &cfg.true_params[p..])?;
    let estimators = cfg.estimators();
    let z: Vec<f64> = cfg
        .alphas
        .iter()
        .map(|&a| normal_quantile(1.0 - a / 2.0))
        .collect::<Result<_>>()?;

    let outcomes = cfg
        .execution
        .map_range(0..cfg.replications, |r| run_replicate(cfg, &design, &mu, &phi, r));

    let k = cfg.true_params.len();
    let mut fit_failures = 0;
    let mut failures: BTreeMap<Estimator, usize> = estimators.iter().map(|&e| (e, 0)).collect();
    let mut dropped_total = 0;
    let mut interval_failures: BTreeMap<Estimator, usize> = estimators.iter().map(|&e| (e, 0)).collect();
    let mut complete: Vec<Vec<(Vec<f64>, Option<Vec<f64>>)>> = Vec::new();
    for outcome in outcomes {
        match outcome? {
            Replicate::FitFailed => fit_failures += 1,
            Replicate::Done { estimates, dropped } => {
                dropped_total += dropped;
                for (e, est) in estimators.iter().zip(&estimates) {
                    if est.is_none() {
                        *failures.get_mut(e).expect("estimator listed") += 1;
                    }
                }
                if estimates.iter().all(Option::is_some) {
                    for (e, est) in estimators.iter().zip(&estimates) {
                        if matches!(est, Some((_, None))) {
                            *interval_failures.get_mut(e).expect("estimator listed") += 1;
                        }
                    }
                    complete.push(estimates.into_iter().flatten().collect());
                }
            }
        }
    }

    let names = cfg.model.param_names();
    let mut summaries = Vec::with_capacity(estimators.len() * k);
    let count = complete.len() as f64;
    for (ei, &e) in estimators.iter().enumerate() {
        for j in 0..k {
            let truth = cfg.true_params[j];
            let (mut mean, mut variance, mut mse) = (f64::NAN, f64::NAN, f64::NAN);
            let mut coverage = vec![f64::NAN; z.len()];
            if !complete.is_empty() {
                mean = complete.iter().map(|rep| rep[ei].0[j]).sum::<f64>() / count;
                variance = complete.iter().map(|rep| (rep[ei].0[j] - mean).powi(2)).sum::<f64>() / count;
                mse = complete.iter().map(|rep| (rep[ei].0[j] - truth).powi(2)).sum::<f64>() / count;
                for (c, &zq) in coverage.iter_mut().zip(&z) {
                    let hits = complete
                        .iter()
                        .filter(|rep| match &rep[ei] {
                            (est, Some(se)) => (est[j] - truth).abs() <= zq * se[j],
                            (_, None) => false,
                        })
                        .count();
                    *c = hits as f64 / count;
                }
            }
            summaries.push(EstimatorSummary {
                estimator: e,
                parameter: names[j].clone(),
                truth,
                mean,
                bias: mean - truth,
                variance,
                mse,
                coverage,
            });
        }
    }

    Ok(StudyReport {
        n: cfg.n,
        replications: cfg.replications,
        bootstrap_b: cfg.bootstrap_b,
        seed: cfg.seed,
        parameters: names,
        truth: cfg.true_params.clone(),
        levels: cfg.alphas.iter().map(|a| 1.0 - a).collect(),
        covariates: design.rows.clone(),
        completed: complete.len(),
        fit_failures,
        estimator_failures: failures,
        interval_failures,
        bootstrap_refits_dropped: dropped_total,
        summaries,
    })
}
