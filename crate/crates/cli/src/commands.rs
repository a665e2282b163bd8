//! The four subcommands, each turning a configuration into a report.

use std::path::PathBuf;
use std::sync::Arc;

use dispmod::bias::{bias_matrices, bias_mu_phi, cox_snell, BiasSource};
use dispmod::bootstrap::{bootstrap_bias, BootstrapPlan, BootstrapScheme, RefitPolicy};
use dispmod::exec::{resolve_threads, with_threads};
use dispmod::families::Family;
use dispmod::fit::{fit_mle_with, information_inverse, std_errors, wald_intervals, FitOptions, FitResult, UpdateScheme};
use dispmod::links::Link;
use dispmod::model::{Dataset, ModelSpec, Predictor, TermPredictor};
use dispmod::simulate::{run_study, CovariateLaw, StudyConfig, StudyReport};

use crate::config::RunConfig;
use crate::data::{bindings, dataset, Table};
use crate::error::CliError;
use crate::report::{
    finite, BiasReport, BootstrapReport, FitReport, FittedValues, Intervals, ModelInfo, Report, SimulateReport, StudyRow,
};

/// Command-line values that take precedence over the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub alpha: Option<Vec<f64>>,
    pub boot_b: Option<usize>,
    pub boot_scheme: Option<String>,
}

fn build_model(cfg: &RunConfig, covariates: &[String]) -> Result<ModelSpec, CliError> {
    let m = &cfg.model;
    let family: Family = m.family.parse().map_err(|e: dispmod::Error| CliError::Config(format!("model.family: {e}")))?;
    let mean_link: Link =
        m.mean_link.parse().map_err(|e: dispmod::Error| CliError::Config(format!("model.mean_link: {e}")))?;
    let disp_link: Link = m
        .dispersion_link
        .parse()
        .map_err(|e: dispmod::Error| CliError::Config(format!("model.dispersion_link: {e}")))?;
    let mean = TermPredictor::parse(&m.mean, covariates, None)
        .map_err(|e| CliError::Config(format!("model.mean: {e}")))?;
    let disp = m
        .dispersion
        .as_deref()
        .map(|d| {
            TermPredictor::parse(d, covariates, None).map_err(|e| CliError::Config(format!("model.dispersion: {e}")))
        })
        .transpose()?;
    if let Some(declared) = &m.parameters {
        let mut used = mean.param_names();
        used.extend(disp.iter().flat_map(|d| d.param_names()));
        if let Some(u) = used.iter().find(|u| !declared.contains(u)) {
            return Err(CliError::Config(format!(
                "model: '{u}' is neither a declared parameter nor a bound covariate"
            )));
        }
        if let Some(d) = declared.iter().find(|d| !used.contains(d)) {
            return Err(CliError::Config(format!("model.parameters: '{d}' appears in no predictor")));
        }
    }
    let disp = disp.map(|t| Arc::new(t) as Arc<dyn Predictor>);
    ModelSpec::new(family, mean_link, disp_link, Arc::new(mean), disp).map_err(|e| CliError::Config(format!("model: {e}")))
}

fn model_info(cfg: &RunConfig, model: &ModelSpec) -> ModelInfo {
    ModelInfo {
        family: model.family.name(),
        mean_link: model.mean_link.name().to_string(),
        dispersion_link: model.disp_link.name().to_string(),
        mean: cfg.model.mean.clone(),
        dispersion: cfg.model.dispersion.clone(),
        parameters: model.param_names(),
    }
}

fn fit_options(cfg: &RunConfig) -> Result<FitOptions, CliError> {
    let update = match cfg.fit.update.as_deref() {
        None | Some("joint") => UpdateScheme::Joint,
        Some("alternating") => UpdateScheme::Alternating,
        Some(other) => {
            return Err(CliError::Config(format!(
                "fit.update: unknown scheme '{other}' (expected joint or alternating)"
            )))
        }
    };
    if cfg.fit.max_iter == 0 {
        return Err(CliError::Config("fit.max_iter must be at least 1".into()));
    }
    if !(cfg.fit.score_tol > 0.0) {
        return Err(CliError::Config("fit.score_tol must be positive".into()));
    }
    Ok(FitOptions {
        max_iter: cfg.fit.max_iter,
        score_tol: cfg.fit.score_tol,
        update,
        ..FitOptions::default()
    })
}

fn alphas(cfg: &RunConfig, ov: &Overrides) -> Result<Vec<f64>, CliError> {
    let a = ov.alpha.clone().unwrap_or_else(|| cfg.fit.alpha.clone());
    if let Some(bad) = a.iter().find(|&&x| !(x > 0.0 && x < 0.5)) {
        return Err(CliError::Config(format!("alpha must lie in (0, 0.5), got {bad}")));
    }
    Ok(a)
}

fn seed(cfg: &RunConfig, ov: &Overrides) -> u64 {
    ov.seed.or(cfg.seed).unwrap_or(0)
}

fn intervals(estimates: &[f64], se: &[f64], alphas: &[f64]) -> Result<Vec<Intervals>, CliError> {
    alphas
        .iter()
        .map(|&a| {
            let iv = wald_intervals(estimates, se, a)?;
            Ok(Intervals {
                level: 1.0 - a,
                lower: iv.iter().map(|v| v.0).collect(),
                upper: iv.iter().map(|v| v.1).collect(),
            })
        })
        .collect()
}

/// Intervals at a corrected estimate, or none when the information there is
/// not available.
fn corrected_intervals(model: &ModelSpec, data: &Dataset, zeta: &[f64], alphas: &[f64]) -> Vec<Intervals> {
    let p = model.p();
    match information_inverse(model, data, &zeta[..p], &zeta[p..]) {
        Ok((kb, kt)) => intervals(zeta, &std_errors(&kb, &kt), alphas).unwrap_or_default(),
        Err(e) => {
            log::warn!("no intervals at the corrected estimate: {e}");
            Vec::new()
        }
    }
}

struct Prepared {
    model: ModelSpec,
    data: Dataset,
    info: ModelInfo,
    fit: FitResult,
    alphas: Vec<f64>,
}

fn prepare(cfg: &RunConfig, ov: &Overrides) -> Result<Prepared, CliError> {
    let section = cfg
        .data
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [data] section".into()))?;
    let path = ov
        .data
        .clone()
        .or_else(|| section.path.as_ref().map(|p| cfg.resolve(p)))
        .ok_or_else(|| CliError::Config("data.path is not set and --data was not given".into()))?;
    let alphas = alphas(cfg, ov)?;
    let opts = fit_options(cfg)?;
    let table = Table::read(&path)?;
    let bound = bindings(&table, &section.response, section.columns.as_ref())?;
    let covariates: Vec<String> = bound.iter().map(|(ident, _)| ident.clone()).collect();
    let model = build_model(cfg, &covariates)?;
    let data = dataset(&table, &section.response, &bound)?;
    let k = model.p() + model.q();
    if data.n() < k {
        return Err(CliError::Data(format!(
            "not identifiable: {} observations for {k} parameters",
            data.n()
        )));
    }
    let fit = fit_mle_with(&model, &data, None, &opts)?;
    if !fit.converged {
        return Err(CliError::NonConvergence(format!(
            "fit did not converge after {} iterations (score norm {:e})",
            fit.iterations, fit.score_norm
        )));
    }
    let info = model_info(cfg, &model);
    Ok(Prepared {
        model,
        data,
        info,
        fit,
        alphas,
    })
}

fn fit_report(p: &Prepared) -> Result<FitReport, CliError> {
    let est = p.fit.zeta();
    let se = p.fit.std_errors();
    Ok(FitReport {
        model: p.info.clone(),
        n: p.data.n(),
        intervals: intervals(&est, &se, &p.alphas)?,
        estimates: est,
        std_errors: se,
        loglik: p.fit.loglik,
        converged: p.fit.converged,
        iterations: p.fit.iterations,
        score_norm: p.fit.score_norm,
    })
}

pub fn cmd_fit(cfg: &RunConfig, ov: &Overrides) -> Result<Report, CliError> {
    let p = prepare(cfg, ov)?;
    Ok(Report::Fit(fit_report(&p)?))
}

pub fn cmd_bias(cfg: &RunConfig, ov: &Overrides) -> Result<Report, CliError> {
    let p = prepare(cfg, ov)?;
    let cs = cox_snell(&p.model, &p.data, &p.fit)?;
    let m = bias_matrices(&p.model, &p.data, &p.fit.beta, &p.fit.theta)?;
    let corrected = cs.zeta_tilde();
    Ok(Report::Bias(BiasReport {
        fit: fit_report(&p)?,
        b_beta: cs.beta.b_beta.clone(),
        b1_beta: cs.beta.b1_beta.clone(),
        b2_beta: cs.beta.b2_beta.clone(),
        b_beta_regression: cs.beta.b_beta_regression.clone(),
        b_theta: cs.theta.b_theta.clone(),
        q1_theta: cs.theta.q1_theta.clone(),
        q2_theta: cs.theta.q2_theta.clone(),
        b_theta_regression: cs.theta.b_theta_regression.clone(),
        max_form_discrepancy: cs.max_form_discrepancy,
        corrected_intervals: corrected_intervals(&p.model, &p.data, &corrected, &p.alphas),
        corrected,
        fitted: FittedValues {
            mu_hat: m.mu.clone(),
            phi_hat: m.phi.clone(),
            b_mu: cs.mu_phi.b_mu,
            b_phi: cs.mu_phi.b_phi,
            mu_tilde: cs.mu_phi.mu_tilde,
            phi_tilde: cs.mu_phi.phi_tilde,
        },
    }))
}

pub fn cmd_bootstrap(cfg: &RunConfig, ov: &Overrides) -> Result<Report, CliError> {
    let b = ov.boot_b.unwrap_or(cfg.bootstrap.b);
    if b == 0 {
        return Err(CliError::Config("bootstrap B must be at least 1".into()));
    }
    let scheme_name = ov.boot_scheme.clone().unwrap_or_else(|| cfg.bootstrap.scheme.clone());
    let scheme: BootstrapScheme = scheme_name
        .parse()
        .map_err(|e: dispmod::Error| CliError::Config(format!("bootstrap.scheme: {e}")))?;
    let refit_policy = match cfg.bootstrap.refit_policy.as_str() {
        "skip-nonconverged" => RefitPolicy::SkipNonconverged,
        "error" => RefitPolicy::Error,
        other => {
            return Err(CliError::Config(format!(
                "bootstrap.refit_policy: unknown policy '{other}' (expected skip-nonconverged or error)"
            )))
        }
    };
    let p = prepare(cfg, ov)?;
    let mut plan = BootstrapPlan::new(scheme, b, seed(cfg, ov));
    plan.refit_policy = refit_policy;
    plan.fit_options.max_iter = cfg.fit.max_iter;
    plan.fit_options.score_tol = cfg.fit.score_tol;
    let threads = resolve_threads(ov.threads);
    let res = with_threads(threads, || bootstrap_bias(&p.model, &p.data, &p.fit, &plan))?;
    let m = bias_matrices(&p.model, &p.data, &p.fit.beta, &p.fit.theta)?;
    let source = match scheme {
        BootstrapScheme::ParametricFixedX => BiasSource::ParametricBoot,
        BootstrapScheme::NonparametricRandomX => BiasSource::NonparametricBoot,
    };
    let mp = bias_mu_phi(&m, source, None, Some(&res.bias_hat))?;
    Ok(Report::Bootstrap(BootstrapReport {
        fit: fit_report(&p)?,
        scheme: match scheme {
            BootstrapScheme::ParametricFixedX => "parametric-fixed-x".into(),
            BootstrapScheme::NonparametricRandomX => "nonparametric-random-x".into(),
        },
        b,
        seed: plan.seed,
        refit_policy: cfg.bootstrap.refit_policy.clone(),
        corrected_intervals: corrected_intervals(&p.model, &p.data, &res.zeta_bar, &p.alphas),
        zeta_star_mean: res.zeta_star_mean,
        zeta_star_sd: res.zeta_star_sd,
        bias_hat: res.bias_hat,
        zeta_bar: res.zeta_bar,
        replicates_used: res.replicates_used,
        nonconverged: res.nonconverged,
        fitted: FittedValues {
            mu_hat: m.mu.clone(),
            phi_hat: m.phi.clone(),
            b_mu: mp.b_mu,
            b_phi: mp.b_phi,
            mu_tilde: mp.mu_tilde,
            phi_tilde: mp.phi_tilde,
        },
    }))
}

/// Study configuration assembled from the `[model]` and `[simulate]` sections.
pub fn study_config(cfg: &RunConfig, ov: &Overrides) -> Result<StudyConfig, CliError> {
    let sim = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [simulate] section".into()))?;
    let model = build_model(cfg, &sim.covariates)?;
    let covariate_law = if sim.covariate_law == "uniform01" {
        CovariateLaw::Uniform01
    } else {
        let table = Table::read(&cfg.resolve(std::path::Path::new(&sim.covariate_law)))?;
        let cols = sim
            .covariates
            .iter()
            .map(|c| {
                table
                    .column(c)
                    .ok_or_else(|| CliError::Config(format!("covariate '{c}' is not a column of {}", sim.covariate_law)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        CovariateLaw::Fixed((0..table.n()).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
    };
    let boot_b = ov.boot_b.unwrap_or(sim.bootstrap_b);
    let alphas = match &ov.alpha {
        Some(a) => a.clone(),
        None => sim.alphas.clone(),
    };
    let study = StudyConfig {
        model,
        covariates: sim.covariates.clone(),
        true_params: sim.true_params.clone(),
        n: sim.n,
        replications: sim.replications,
        bootstrap_b: boot_b,
        covariate_law,
        seed: seed(cfg, ov),
        alphas,
        execution: Default::default(),
        fit_options: fit_options(cfg)?,
    };
    study.validate().map_err(|e| match e {
        dispmod::Error::Identifiability(m) | dispmod::Error::Dimension(m) => CliError::Config(format!("simulate: {m}")),
        other => CliError::Config(format!("simulate: {other}")),
    })?;
    Ok(study)
}

fn simulate_report(cfg: &RunConfig, model: &ModelSpec, r: &StudyReport) -> SimulateReport {
    SimulateReport {
        model: model_info(cfg, model),
        n: r.n,
        replications: r.replications,
        bootstrap_b: r.bootstrap_b,
        seed: r.seed,
        truth: r.truth.clone(),
        levels: r.levels.clone(),
        covariates: r.covariates.clone(),
        completed: r.completed,
        fit_failures: r.fit_failures,
        estimator_failures: r.estimator_failures.iter().map(|(e, c)| (e.name().to_string(), *c)).collect(),
        interval_failures: r.interval_failures.iter().map(|(e, c)| (e.name().to_string(), *c)).collect(),
        bootstrap_refits_dropped: r.bootstrap_refits_dropped,
        rows: r
            .summaries
            .iter()
            .map(|s| StudyRow {
                estimator: s.estimator.name().to_string(),
                parameter: s.parameter.clone(),
                truth: s.truth,
                mean: finite(s.mean),
                bias: finite(s.bias),
                variance: finite(s.variance),
                mse: finite(s.mse),
                coverage: s.coverage.iter().map(|&c| finite(c)).collect(),
            })
            .collect(),
    }
}

/// Runs the study; returns the report and the delimited table.
pub fn cmd_simulate(cfg: &RunConfig, ov: &Overrides) -> Result<(Report, String), CliError> {
    let study = study_config(cfg, ov)?;
    let threads = resolve_threads(ov.threads);
    let r = with_threads(threads, || run_study(&study))?;
    Ok((Report::Simulate(simulate_report(cfg, &study.model, &r)), r.to_table()))
}
