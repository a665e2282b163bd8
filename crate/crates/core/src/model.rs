//! Model specification: nonlinear predictors for the mean and the precision,
//! the data container, and the local design quantities used by fitting and
//! bias correction.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::families::Family;
use crate::linalg::{rank, weighted_least_squares};
use crate::links::Link;

/// Value, gradient and Hessian of a predictor at one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorEval {
    pub eta: f64,
    pub grad: Vec<f64>,
    /// Row-major `k x k`.
    pub hess: Vec<f64>,
}

/// A twice-differentiable predictor `eta = f(covariates; params)`.
pub trait Predictor: Send + Sync + fmt::Debug {
    fn param_count(&self) -> usize;

    fn param_names(&self) -> Vec<String>;

    /// True when the Hessian is identically zero.
    fn is_linear(&self) -> bool;

    /// Writes the gradient (length `k`) and, if requested, the row-major
    /// Hessian (length `k*k`), returning `eta`.
    fn eval_into(&self, covariates: &[f64], params: &[f64], grad: &mut [f64], hess: Option<&mut [f64]>) -> Result<f64>;

    fn eval(&self, covariates: &[f64], params: &[f64]) -> Result<PredictorEval> {
        let k = self.param_count();
        let mut grad = vec![0.0; k];
        let mut hess = vec![0.0; k * k];
        let eta = self.eval_into(covariates, params, &mut grad, Some(&mut hess))?;
        Ok(PredictorEval { eta, grad, hess })
    }

    /// Deterministic starting values making the predictor approximate `target`
    /// in least squares. `exponent_start` is the starting value for
    /// parameters that enter nonlinearly.
    fn start_values(&self, rows: &[Vec<f64>], target: &[f64], exponent_start: f64) -> Result<Vec<f64>> {
        // one Gauss-Newton step from a flat start
        let k = self.param_count();
        let start = vec![exponent_start; k];
        let mut x = DMatrix::zeros(rows.len(), k);
        let mut resid = vec![0.0; rows.len()];
        let mut grad = vec![0.0; k];
        for (i, row) in rows.iter().enumerate() {
            let eta = self.eval_into(row, &start, &mut grad, None)?;
            x.row_mut(i).copy_from_slice(&grad);
            resid[i] = target[i] - eta;
        }
        let delta = weighted_least_squares(&x, &vec![1.0; rows.len()], &resid)?;
        Ok(start.iter().zip(delta.iter()).map(|(s, d)| s + d).collect())
    }

    fn describe(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Term {
    Intercept { param: usize },
    Linear { param: usize, covariate: usize },
    /// `covariate ^ param`
    Power { covariate: usize, param: usize },
    Offset { covariate: usize },
}

/// Sum of intercept, linear, power and offset terms.
#[derive(Debug, Clone, PartialEq)]
pub struct TermPredictor {
    terms: Vec<Term>,
    params: Vec<String>,
    covariates: Vec<String>,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

impl TermPredictor {
    pub fn new(terms: Vec<Term>, params: Vec<String>, covariates: Vec<String>) -> Result<Self> {
        let mut used = vec![false; params.len()];
        for t in &terms {
            let (p, c) = match *t {
                Term::Intercept { param } => (Some(param), None),
                Term::Linear { param, covariate } | Term::Power { covariate, param } => (Some(param), Some(covariate)),
                Term::Offset { covariate } => (None, Some(covariate)),
            };
            if let Some(p) = p {
                *used
                    .get_mut(p)
                    .ok_or_else(|| Error::InvalidConfig(format!("term refers to parameter index {p}")))? = true;
            }
            if let Some(c) = c {
                if c >= covariates.len() {
                    return Err(Error::InvalidConfig(format!("term refers to covariate index {c}")));
                }
            }
        }
        if let Some(p) = used.iter().position(|u| !u) {
            return Err(Error::InvalidConfig(format!("parameter '{}' appears in no term", params[p])));
        }
        if terms.iter().filter(|t| matches!(t, Term::Intercept { .. })).count() > 1 {
            return Err(Error::InvalidConfig("predictor has more than one intercept".into()));
        }
        Ok(TermPredictor {
            terms,
            params,
            covariates,
        })
    }

    /// Parses expressions such as `b0 + b1*x1 + x2^b2`.
    ///
    /// Identifiers found in `covariates` are covariates. If `declared` is
    /// given, every other identifier must be listed there; otherwise
    /// parameters are created in order of first appearance.
    pub fn parse(expr: &str, covariates: &[String], declared: Option<&[String]>) -> Result<Self> {
        let mut params: Vec<String> = declared.map(|d| d.to_vec()).unwrap_or_default();
        let bad = |msg: String| Error::InvalidConfig(format!("predictor '{expr}': {msg}"));
        let cov_index = |name: &str| covariates.iter().position(|c| c == name);
        let param_index = |name: &str, params: &mut Vec<String>| -> Result<usize> {
            if let Some(i) = params.iter().position(|p| p == name) {
                return Ok(i);
            }
            if declared.is_some() {
                return Err(bad(format!("'{name}' is neither a declared parameter nor a bound covariate")));
            }
            params.push(name.to_string());
            Ok(params.len() - 1)
        };
        let mut terms = Vec::new();
        if expr.trim().is_empty() {
            return Err(bad("empty expression".into()));
        }
        for raw in expr.split('+') {
            let term = raw.trim();
            if term.is_empty() {
                return Err(bad("empty term".into()));
            }
            if let Some((lhs, rhs)) = term.split_once('^') {
                let (base, exp) = (lhs.trim(), rhs.trim());
                if !is_identifier(base) || !is_identifier(exp) {
                    return Err(bad(format!("malformed power term '{term}'")));
                }
                let covariate = cov_index(base).ok_or_else(|| bad(format!("'{base}' is not a bound covariate")))?;
                if cov_index(exp).is_some() {
                    return Err(bad(format!("exponent '{exp}' must be a parameter")));
                }
                let param = param_index(exp, &mut params)?;
                terms.push(Term::Power { covariate, param });
            } else if let Some((lhs, rhs)) = term.split_once('*') {
                let (a, b) = (lhs.trim(), rhs.trim());
                if !is_identifier(a) || !is_identifier(b) {
                    return Err(bad(format!("malformed product term '{term}'")));
                }
                let (p, c) = match (cov_index(a), cov_index(b)) {
                    (None, Some(c)) => (a, c),
                    (Some(c), None) => (b, c),
                    (Some(_), Some(_)) => return Err(bad(format!("'{term}' multiplies two covariates"))),
                    (None, None) => {
                        return Err(bad(format!("neither '{a}' nor '{b}' in '{term}' is a bound covariate")))
                    }
                };
                let param = param_index(p, &mut params)?;
                terms.push(Term::Linear { param, covariate: c });
            } else {
                if !is_identifier(term) {
                    return Err(bad(format!("malformed term '{term}'")));
                }
                match cov_index(term) {
                    Some(covariate) => terms.push(Term::Offset { covariate }),
                    None => {
                        let param = param_index(term, &mut params)?;
                        terms.push(Term::Intercept { param });
                    }
                }
            }
        }
        TermPredictor::new(terms, params, covariates.to_vec()).map_err(|e| match e {
            Error::InvalidConfig(m) => bad(m),
            other => other,
        })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Indices of covariates used as power-term bases.
    pub fn power_covariates(&self) -> Vec<usize> {
        self.terms
            .iter()
            .filter_map(|t| match t {
                Term::Power { covariate, .. } => Some(*covariate),
                _ => None,
            })
            .collect()
    }
}

impl Predictor for TermPredictor {
    fn param_count(&self) -> usize {
        self.params.len()
    }

    fn param_names(&self) -> Vec<String> {
        self.params.clone()
    }

    fn is_linear(&self) -> bool {
        !self.terms.iter().any(|t| matches!(t, Term::Power { .. }))
    }

    fn eval_into(&self, covariates: &[f64], params: &[f64], grad: &mut [f64], mut hess: Option<&mut [f64]>) -> Result<f64> {
        let k = self.params.len();
        if params.len() != k || grad.len() != k || hess.as_ref().is_some_and(|h| h.len() != k * k) {
            return Err(Error::Dimension(format!("predictor has {k} parameters, got {}", params.len())));
        }
        if covariates.len() < self.covariates.len() {
            return Err(Error::Dimension(format!(
                "predictor needs {} covariates, got {}",
                self.covariates.len(),
                covariates.len()
            )));
        }
        grad.fill(0.0);
        if let Some(h) = hess.as_deref_mut() {
            h.fill(0.0);
        }
        let mut eta = 0.0;
        for t in &self.terms {
            match *t {
                Term::Intercept { param } => {
                    eta += params[param];
                    grad[param] += 1.0;
                }
                Term::Linear { param, covariate } => {
                    let x = covariates[covariate];
                    eta += params[param] * x;
                    grad[param] += x;
                }
                Term::Power { covariate, param } => {
                    let x = covariates[covariate];
                    if !(x > 0.0) {
                        return Err(crate::error::domain(
                            "predictor_eval",
                            format!("power term base '{}' = {x} must be positive", self.covariates[covariate]),
                        ));
                    }
                    let lx = x.ln();
                    let v = x.powf(params[param]);
                    eta += v;
                    grad[param] += lx * v;
                    if let Some(h) = hess.as_deref_mut() {
                        h[param * k + param] += lx * lx * v;
                    }
                }
                Term::Offset { covariate } => eta += covariates[covariate],
            }
        }
        Ok(eta)
    }

    /// Power exponents are held at `exponent_start`; the remaining
    /// parameters come from least squares of `target` minus the power and
    /// offset contributions.
    fn start_values(&self, rows: &[Vec<f64>], target: &[f64], exponent_start: f64) -> Result<Vec<f64>> {
        let k = self.params.len();
        let mut start = vec![0.0; k];
        let mut free = vec![false; k];
        for t in &self.terms {
            match *t {
                Term::Power { param, .. } => start[param] = exponent_start,
                Term::Intercept { param } | Term::Linear { param, .. } => free[param] = true,
                Term::Offset { .. } => {}
            }
        }
        // a parameter that is both an exponent and a coefficient stays fixed
        for t in &self.terms {
            if let Term::Power { param, .. } = *t {
                free[param] = false;
            }
        }
        let cols: Vec<usize> = (0..k).filter(|&j| free[j]).collect();
        if cols.is_empty() {
            return Ok(start);
        }
        let n = rows.len();
        let mut x = DMatrix::zeros(n, cols.len());
        let mut resid = vec![0.0; n];
        let mut grad = vec![0.0; k];
        for (i, row) in rows.iter().enumerate() {
            let eta = self.eval_into(row, &start, &mut grad, None)?;
            for (c, &j) in cols.iter().enumerate() {
                x[(i, c)] = grad[j];
            }
            resid[i] = target[i] - eta;
        }
        let coef = weighted_least_squares(&x, &vec![1.0; n], &resid)?;
        for (c, &j) in cols.iter().enumerate() {
            start[j] += coef[c];
        }
        Ok(start)
    }

    fn describe(&self) -> String {
        self.terms
            .iter()
            .map(|t| match *t {
                Term::Intercept { param } => self.params[param].clone(),
                Term::Linear { param, covariate } => format!("{}*{}", self.params[param], self.covariates[covariate]),
                Term::Power { covariate, param } => format!("{}^{}", self.covariates[covariate], self.params[param]),
                Term::Offset { covariate } => self.covariates[covariate].clone(),
            })
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// Response vector plus a covariate table shared by both predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub names: Vec<String>,
}

impl Dataset {
    pub fn new(y: Vec<f64>, rows: Vec<Vec<f64>>, names: Vec<String>) -> Result<Self> {
        if y.len() != rows.len() {
            return Err(Error::Dimension(format!("{} responses but {} covariate rows", y.len(), rows.len())));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != names.len()) {
            return Err(Error::Dimension(format!("row {i} has {} covariates, expected {}", rows[i].len(), names.len())));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::RowDomain {
                row: i,
                detail: "response is not finite".into(),
            });
        }
        if let Some(i) = rows.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(Error::RowDomain {
                row: i,
                detail: "covariate is not finite".into(),
            });
        }
        Ok(Dataset { y, rows, names })
    }

    /// Builds a dataset from named columns.
    pub fn from_columns(y: Vec<f64>, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let n = y.len();
        if let Some((name, c)) = columns.iter().find(|(_, c)| c.len() != n) {
            return Err(Error::Dimension(format!("column '{name}' has {} rows, expected {n}", c.len())));
        }
        let rows = (0..n).map(|i| columns.iter().map(|(_, c)| c[i]).collect()).collect();
        let names = columns.into_iter().map(|(name, _)| name).collect();
        Dataset::new(y, rows, names)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn with_response(&self, y: Vec<f64>) -> Self {
        Dataset {
            y,
            rows: self.rows.clone(),
            names: self.names.clone(),
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Dataset {
            y: idx.iter().map(|&i| self.y[i]).collect(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            names: self.names.clone(),
        }
    }

    /// `k` stacked copies of the data.
    pub fn replicate(&self, k: usize) -> Self {
        let idx: Vec<usize> = (0..k).flat_map(|_| 0..self.n()).collect();
        self.select_rows(&idx)
    }
}

/// Family, links and the two predictors. The precision predictor is absent
/// for families whose precision is fixed.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub family: Family,
    pub mean_link: Link,
    pub disp_link: Link,
    pub mean: Arc<dyn Predictor>,
    pub dispersion: Option<Arc<dyn Predictor>>,
}

impl ModelSpec {
    pub fn new(
        family: Family,
        mean_link: Link,
        disp_link: Link,
        mean: Arc<dyn Predictor>,
        dispersion: Option<Arc<dyn Predictor>>,
    ) -> Result<Self> {
        match (family.fixed_phi(), &dispersion) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(format!(
                    "family {family} has fixed precision and takes no dispersion predictor"
                )))
            }
            (None, None) => {
                return Err(Error::InvalidConfig(format!("family {family} needs a dispersion predictor")))
            }
            _ => {}
        }
        if mean.param_count() == 0 {
            return Err(Error::InvalidConfig("mean predictor has no parameters".into()));
        }
        if let Some(d) = &dispersion {
            if d.param_count() == 0 {
                return Err(Error::InvalidConfig("dispersion predictor has no parameters".into()));
            }
            let mean_names = mean.param_names();
            if let Some(dup) = d.param_names().iter().find(|n| mean_names.contains(n)) {
                return Err(Error::InvalidConfig(format!(
                    "parameter '{dup}' appears in both predictors; the blocks must be disjoint"
                )));
            }
        }
        Ok(ModelSpec {
            family,
            mean_link,
            disp_link,
            mean,
            dispersion,
        })
    }

    /// Convenience constructor parsing both predictor expressions.
    pub fn from_exprs(
        family: Family,
        mean_link: Link,
        disp_link: Link,
        mean: &str,
        dispersion: Option<&str>,
        covariates: &[String],
    ) -> Result<Self> {
        let m = TermPredictor::parse(mean, covariates, None)?;
        let d = dispersion
            .map(|e| TermPredictor::parse(e, covariates, None).map(|t| Arc::new(t) as Arc<dyn Predictor>))
            .transpose()?;
        ModelSpec::new(family, mean_link, disp_link, Arc::new(m), d)
    }

    pub fn p(&self) -> usize {
        self.mean.param_count()
    }

    pub fn q(&self) -> usize {
        self.dispersion.as_ref().map_or(0, |d| d.param_count())
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = self.mean.param_names();
        if let Some(d) = &self.dispersion {
            names.extend(d.param_names());
        }
        names
    }
}

/// Local design quantities at `(beta, theta)`.
#[derive(Debug, Clone)]
pub struct DesignState {
    /// `n x p`, `d eta1 / d beta`
    pub xtilde: DMatrix<f64>,
    /// `n x q`, `d eta2 / d theta`
    pub ztilde: DMatrix<f64>,
    pub xhess: Vec<DMatrix<f64>>,
    pub zhess: Vec<DMatrix<f64>>,
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
    pub mu: Vec<f64>,
    pub phi: Vec<f64>,
    pub dmu: Vec<f64>,
    pub d2mu: Vec<f64>,
    pub dphi: Vec<f64>,
    pub d2phi: Vec<f64>,
    pub mean_linear: bool,
    pub disp_linear: bool,
}

fn row_err(row: usize, e: Error) -> Error {
    match e {
        Error::Domain { detail, .. } => Error::RowDomain { row, detail },
        other => other,
    }
}

/// Evaluates `mu` and `phi` only (no derivatives).
pub fn mu_phi(model: &ModelSpec, data: &Dataset, beta: &[f64], theta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_params(model, beta, theta)?;
    let n = data.n();
    let mut mu = vec![0.0; n];
    let mut phi = vec![0.0; n];
    let mut gb = vec![0.0; model.p()];
    let mut gt = vec![0.0; model.q()];
    for i in 0..n {
        let row = &data.rows[i];
        let e1 = model.mean.eval_into(row, beta, &mut gb, None).map_err(|e| row_err(i, e))?;
        mu[i] = model.mean_link.eval(e1).map_err(|e| row_err(i, e))?.mu;
        model.family.check_mu(mu[i]).map_err(|e| row_err(i, e))?;
        phi[i] = match (&model.dispersion, model.family.fixed_phi()) {
            (Some(d), _) => {
                let e2 = d.eval_into(row, theta, &mut gt, None).map_err(|e| row_err(i, e))?;
                model.disp_link.eval(e2).map_err(|e| row_err(i, e))?.mu
            }
            (None, Some(f)) => f,
            (None, None) => unreachable!("validated by ModelSpec::new"),
        };
        model.family.check_phi(phi[i]).map_err(|e| row_err(i, e))?;
    }
    Ok((mu, phi))
}

fn check_params(model: &ModelSpec, beta: &[f64], theta: &[f64]) -> Result<()> {
    if beta.len() != model.p() || theta.len() != model.q() {
        return Err(Error::Dimension(format!(
            "model has p = {}, q = {}; got {} and {} parameters",
            model.p(),
            model.q(),
            beta.len(),
            theta.len()
        )));
    }
    Ok(())
}

/// Evaluates all design quantities without the rank check.
pub fn design_eval(model: &ModelSpec, data: &Dataset, beta: &[f64], theta: &[f64]) -> Result<DesignState> {
    check_params(model, beta, theta)?;
    let (n, p, q) = (data.n(), model.p(), model.q());
    let mean_linear = model.mean.is_linear();
    let disp_linear = model.dispersion.as_ref().is_none_or(|d| d.is_linear());
    let mut st = DesignState {
        xtilde: DMatrix::zeros(n, p),
        ztilde: DMatrix::zeros(n, q),
        xhess: Vec::with_capacity(n),
        zhess: Vec::with_capacity(n),
        eta1: vec![0.0; n],
        eta2: vec![0.0; n],
        mu: vec![0.0; n],
        phi: vec![0.0; n],
        dmu: vec![0.0; n],
        d2mu: vec![0.0; n],
        dphi: vec![0.0; n],
        d2phi: vec![0.0; n],
        mean_linear,
        disp_linear,
    };
    let mut grad_b = vec![0.0; p];
    let mut hess_b = vec![0.0; p * p];
    let mut grad_t = vec![0.0; q];
    let mut hess_t = vec![0.0; q * q];
    for i in 0..n {
        let row = &data.rows[i];
        let e1 = model
            .mean
            .eval_into(row, beta, &mut grad_b, Some(&mut hess_b))
            .map_err(|e| row_err(i, e))?;
        let l1 = model.mean_link.eval(e1).map_err(|e| row_err(i, e))?;
        model.family.check_mu(l1.mu).map_err(|e| row_err(i, e))?;
        st.eta1[i] = e1;
        st.mu[i] = l1.mu;
        st.dmu[i] = l1.dmu;
        st.d2mu[i] = l1.d2mu;
        st.xtilde.row_mut(i).copy_from_slice(&grad_b);
        st.xhess.push(DMatrix::from_row_slice(p, p, &hess_b));
        match &model.dispersion {
            Some(d) => {
                let e2 = d.eval_into(row, theta, &mut grad_t, Some(&mut hess_t)).map_err(|e| row_err(i, e))?;
                let l2 = model.disp_link.eval(e2).map_err(|e| row_err(i, e))?;
                model.family.check_phi(l2.mu).map_err(|e| row_err(i, e))?;
                st.eta2[i] = e2;
                st.phi[i] = l2.mu;
                st.dphi[i] = l2.dmu;
                st.d2phi[i] = l2.d2mu;
                st.ztilde.row_mut(i).copy_from_slice(&grad_t);
                st.zhess.push(DMatrix::from_row_slice(q, q, &hess_t));
            }
            None => {
                st.phi[i] = model.family.fixed_phi().expect("validated by ModelSpec::new");
                st.zhess.push(DMatrix::zeros(0, 0));
            }
        }
    }
    Ok(st)
}

/// Evaluates the design and checks that both local design matrices have full
/// column rank.
pub fn design_build(model: &ModelSpec, data: &Dataset, beta: &[f64], theta: &[f64]) -> Result<DesignState> {
    let (p, q) = (model.p(), model.q());
    if data.n() < p + q {
        return Err(Error::Identifiability(format!(
            "{} observations cannot identify {} parameters",
            data.n(),
            p + q
        )));
    }
    let st = design_eval(model, data, beta, theta)?;
    let rx = rank(&st.xtilde);
    if rx < p {
        return Err(Error::RankDeficient {
            block: "mean",
            rank: rx,
            expected: p,
        });
    }
    let rz = rank(&st.ztilde);
    if rz < q {
        return Err(Error::RankDeficient {
            block: "dispersion",
            rank: rz,
            expected: q,
        });
    }
    Ok(st)
}
