//! Log-likelihood, score, expected information and Fisher-scoring fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{rank, spd_inverse, weighted_crossprod, xt_vec};
use crate::model::{design_build, design_eval, mu_phi, Dataset, DesignState, ModelSpec};
use crate::specialfns::normal_quantile;

/// Per-observation pieces of the likelihood at a design point.
#[derive(Debug, Clone)]
pub struct RowTerms {
    /// `phi t + a`
    pub loglik: Vec<f64>,
    /// `t'(y, mu)`
    pub tstar: Vec<f64>,
    /// `t(y, mu) + a'(phi, y)`
    pub v: Vec<f64>,
}

fn row_terms(model: &ModelSpec, data: &Dataset, mu: &[f64], phi: &[f64]) -> Result<RowTerms> {
    let n = data.n();
    let mut out = RowTerms {
        loglik: vec![0.0; n],
        tstar: vec![0.0; n],
        v: vec![0.0; n],
    };
    for i in 0..n {
        let lt = model
            .family
            .loglik_terms(data.y[i], mu[i], phi[i])
            .map_err(|e| match e {
                Error::Domain { detail, .. } => Error::RowDomain { row: i, detail },
                other => other,
            })?;
        out.loglik[i] = phi[i] * lt.t + lt.a;
        out.tstar[i] = lt.tprime;
        out.v[i] = lt.t + lt.aprime;
    }
    Ok(out)
}

/// Log-likelihood `sum {phi_i t(y_i, mu_i) + a(phi_i, y_i)}`.
pub fn loglik(model: &ModelSpec, data: &Dataset, beta: &[f64], theta: &[f64]) -> Result<f64> {
    let (mu, phi) = mu_phi(model, data, beta, theta)?;
    Ok(row_terms(model, data, &mu, &phi)?.loglik.iter().sum())
}

fn score_parts(model: &ModelSpec, data: &Dataset, st: &DesignState) -> Result<(f64, DVector<f64>, DVector<f64>)> {
    let rt = row_terms(model, data, &st.mu, &st.phi)?;
    let wb: Vec<f64> = (0..data.n()).map(|i| st.phi[i] * st.dmu[i] * rt.tstar[i]).collect();
    let ub = xt_vec(&st.xtilde, &wb);
    let ut = if model.q() > 0 {
        let wt: Vec<f64> = (0..data.n()).map(|i| st.dphi[i] * rt.v[i]).collect();
        xt_vec(&st.ztilde, &wt)
    } else {
        DVector::zeros(0)
    };
    Ok((rt.loglik.iter().sum(), ub, ut))
}

/// Score vector `(U_beta, U_theta)`.
pub fn score(model: &ModelSpec, data: &Dataset, beta: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    let st = design_eval(model, data, beta, theta)?;
    let (_, ub, ut) = score_parts(model, data, &st)?;
    Ok(ub.iter().chain(ut.iter()).cloned().collect())
}

/// Diagonal weights `W_beta = -d2 (dmu/deta1)^2` and `W_theta = -alpha2 (dphi/deta2)^2`.
pub fn weights(model: &ModelSpec, st: &DesignState) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = st.mu.len();
    let mut wb = vec![0.0; n];
    let mut wt = vec![0.0; if model.q() > 0 { n } else { 0 }];
    for i in 0..n {
        let c = model.family.cumulants(st.mu[i], st.phi[i])?;
        wb[i] = -c.d2 * st.dmu[i] * st.dmu[i];
        if model.q() > 0 {
            wt[i] = -c.alpha2 * st.dphi[i] * st.dphi[i];
        }
    }
    Ok((wb, wt))
}

/// The two diagonal blocks of the expected information; the cross block is
/// identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Information {
    pub k_beta: DMatrix<f64>,
    pub k_theta: DMatrix<f64>,
}

fn information_from_design(model: &ModelSpec, st: &DesignState) -> Result<Information> {
    let (wb, wt) = weights(model, st)?;
    if wb.iter().chain(wt.iter()).any(|&w| !(w > 0.0)) {
        log::warn!("nonpositive information weights; the information may not be positive definite");
    }
    let phi_wb: Vec<f64> = wb.iter().zip(&st.phi).map(|(w, p)| w * p).collect();
    Ok(Information {
        k_beta: weighted_crossprod(&st.xtilde, &phi_wb),
        k_theta: weighted_crossprod(&st.ztilde, &wt),
    })
}

pub fn information(model: &ModelSpec, data: &Dataset, beta: &[f64], theta: &[f64]) -> Result<Information> {
    let st = design_eval(model, data, beta, theta)?;
    information_from_design(model, &st)
}

/// Inverses of both information blocks at `(beta, theta)`.
pub fn information_inverse(
    model: &ModelSpec,
    data: &Dataset,
    beta: &[f64],
    theta: &[f64],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let k = information(model, data, beta, theta)?;
    Ok((spd_inverse(&k.k_beta, "K_beta")?, spd_inverse(&k.k_theta, "K_theta")?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateScheme {
    /// Both blocks stepped together with one line search.
    #[default]
    Joint,
    /// A mean-block step followed by a dispersion-block step.
    Alternating,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    pub score_tol: f64,
    pub step_tol: f64,
    pub max_halvings: usize,
    pub update: UpdateScheme,
    pub step: StepRule,
    /// Retry from the other starting points when a fit does not converge.
    pub restarts: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 100,
            score_tol: 1e-8,
            step_tol: 1e-10,
            max_halvings: 30,
            update: UpdateScheme::Joint,
            step: StepRule::ScoringNewton,
            restarts: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta: Vec<f64>,
    pub theta: Vec<f64>,
    pub loglik: f64,
    pub k_beta_inv: DMatrix<f64>,
    pub k_theta_inv: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `max |U|` at the returned estimate.
    pub score_norm: f64,
    /// Log-likelihood after each accepted step, starting with the start point.
    pub loglik_trace: Vec<f64>,
}

impl FitResult {
    pub fn zeta(&self) -> Vec<f64> {
        self.beta.iter().chain(self.theta.iter()).cloned().collect()
    }

    pub fn std_errors(&self) -> Vec<f64> {
        std_errors(&self.k_beta_inv, &self.k_theta_inv)
    }

    /// Wald intervals for `(beta, theta)` at level `1 - alpha`.
    pub fn wald_intervals(&self, alpha: f64) -> Result<Vec<(f64, f64)>> {
        wald_intervals(&self.zeta(), &self.std_errors(), alpha)
    }

    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                iterations: self.iterations,
                score_norm: self.score_norm,
            })
        }
    }
}

pub fn std_errors(k_beta_inv: &DMatrix<f64>, k_theta_inv: &DMatrix<f64>) -> Vec<f64> {
    k_beta_inv
        .diagonal()
        .iter()
        .chain(k_theta_inv.diagonal().iter())
        .map(|v| v.max(0.0).sqrt())
        .collect()
}

/// `estimate -/+ q_{1 - alpha/2} se`
pub fn wald_intervals(estimates: &[f64], se: &[f64], alpha: f64) -> Result<Vec<(f64, f64)>> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 0.5), got {alpha}")));
    }
    if estimates.len() != se.len() {
        return Err(Error::Dimension("estimates and standard errors differ in length".into()));
    }
    let z = normal_quantile(1.0 - alpha / 2.0)?;
    Ok(estimates.iter().zip(se).map(|(&e, &s)| (e - z * s, e + z * s)).collect())
}

/// Nudge of boundary responses into the open `mu` domain when forming start values.
const START_NUDGE: f64 = 0.01;

fn clamp_into(y: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    let nudge = if width.is_finite() {
        START_NUDGE * width
    } else {
        START_NUDGE * y.abs().max(1.0)
    };
    if y <= lo {
        lo + if width.is_finite() { nudge } else { START_NUDGE * lo.abs().max(1.0) }
    } else if y >= hi {
        hi - if width.is_finite() { nudge } else { START_NUDGE * hi.abs().max(1.0) }
    } else {
        y
    }
}

/// Maximizes the likelihood over a constant precision for fixed `mu`.
fn constant_phi(model: &ModelSpec, data: &Dataset, mu: &[f64]) -> Result<f64> {
    let fam = &model.family;
    let score = |phi: f64| -> Result<(f64, f64)> {
        let mut s = 0.0;
        let mut ds = 0.0;
        for i in 0..data.n() {
            let t = fam.t_derivs(data.y[i], mu[i])?[0];
            let a = fam.a_derivs(phi, data.y[i])?;
            s += t + a[1];
            ds += a[2];
        }
        Ok((s, ds))
    };
    // the score is decreasing in phi; bracket in log phi, then safeguarded Newton
    let (mut lo, mut hi) = (0.0_f64, 0.0_f64);
    let (lmin, lmax) = (-18.0_f64, 27.0_f64);
    while score(lo.exp())?.0 < 0.0 {
        lo -= 2.0;
        if lo < lmin {
            return Ok(lmin.exp());
        }
    }
    while score(hi.exp())?.0 > 0.0 {
        hi += 2.0;
        if hi > lmax {
            return Ok(lmax.exp());
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let phi = x.exp();
        let (s, ds) = score(phi)?;
        if s > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // d s / d log phi = phi ds
        let newton = x - s / (phi * ds);
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-12 || s.abs() < 1e-12 {
            break;
        }
    }
    Ok(x.exp())
}

/// Exponents tried for the dispersion predictor's power terms, in order.
const DISP_EXPONENT_STARTS: [f64; 3] = [1.0, 0.0, 2.0];

/// Deterministic starting values: mean exponents at 1 with least squares on
/// `g1(y)`, then least squares of the dispersion predictor (exponents at 1)
/// on the constant-precision solution.
pub fn start_values(model: &ModelSpec, data: &Dataset) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut all = start_candidates(model, data)?;
    Ok(all.swap_remove(0))
}

/// Distinct starting points differing in the dispersion exponents; the first
/// is [`start_values`].
pub fn start_candidates(model: &ModelSpec, data: &Dataset) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let (flo, fhi) = model.family.mu_domain();
    let (llo, lhi) = model.mean_link.mu_domain();
    let (lo, hi) = (flo.max(llo), fhi.min(lhi));
    let yc: Vec<f64> = data.y.iter().map(|&y| clamp_into(y, lo, hi)).collect();
    let target = yc.iter().map(|&y| model.mean_link.apply(y)).collect::<Result<Vec<f64>>>()?;
    let theta_probe = vec![0.0; model.q()];
    let valid = |beta: &[f64]| -> bool {
        let mut g = vec![0.0; model.p()];
        data.rows.iter().all(|row| {
            model
                .mean
                .eval_into(row, beta, &mut g, None)
                .and_then(|eta| model.mean_link.eval(eta))
                .is_ok_and(|l| model.family.check_mu(l.mu).is_ok())
        })
    };
    let mut beta = model.mean.start_values(&data.rows, &target, 1.0)?;
    if !valid(&beta) {
        let ybar = yc.iter().sum::<f64>() / yc.len() as f64;
        let flat = vec![model.mean_link.apply(clamp_into(ybar, lo, hi))?; data.n()];
        beta = model.mean.start_values(&data.rows, &flat, 1.0)?;
        if !valid(&beta) {
            return Err(Error::DomainEscape);
        }
    }
    let Some(disp) = &model.dispersion else {
        return Ok(vec![(beta, theta_probe)]);
    };
    let (mu, _) = mu_phi(model, data, &beta, &theta_probe).or_else(|_| {
        // theta_probe may be outside the dispersion link domain; mu does not depend on it
        let mut g = vec![0.0; model.p()];
        let mu = data
            .rows
            .iter()
            .map(|row| Ok(model.mean_link.eval(model.mean.eval_into(row, &beta, &mut g, None)?)?.mu))
            .collect::<Result<Vec<f64>>>()?;
        Ok::<_, Error>((mu, Vec::new()))
    })?;
    let phi0 = constant_phi(model, data, &mu)?;
    let (dlo, dhi) = model.disp_link.mu_domain();
    let eta0 = model.disp_link.apply(clamp_into(phi0, dlo.max(0.0), dhi))?;
    let target = vec![eta0; data.n()];
    let mut out: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for e in DISP_EXPONENT_STARTS {
        match disp.start_values(&data.rows, &target, e) {
            Ok(theta) if !out.iter().any(|(_, t)| *t == theta) => out.push((beta.clone(), theta)),
            Ok(_) => {}
            Err(err) if out.is_empty() && e == DISP_EXPONENT_STARTS[2] => return Err(err),
            Err(_) => {}
        }
    }
    Ok(out)
}

/// Negative Hessian of the log-likelihood (observed information), ordered
/// `(beta, theta)`.
pub fn observed_information(model: &ModelSpec, data: &Dataset, st: &DesignState) -> Result<DMatrix<f64>> {
    let (p, q) = (model.p(), model.q());
    let mut h = DMatrix::zeros(p + q, p + q);
    for i in 0..data.n() {
        let y = data.y[i];
        let t = model.family.t_derivs(y, st.mu[i])?;
        let x = st.xtilde.row(i);
        let phi = st.phi[i];
        let cxx = phi * (t[2] * st.dmu[i] * st.dmu[i] + t[1] * st.d2mu[i]);
        let chx = phi * t[1] * st.dmu[i];
        for r in 0..p {
            for s in 0..p {
                h[(r, s)] -= cxx * x[r] * x[s] + chx * st.xhess[i][(r, s)];
            }
        }
        if q == 0 {
            continue;
        }
        let a = model.family.a_derivs(phi, y)?;
        let z = st.ztilde.row(i);
        let v = t[0] + a[1];
        let czz = a[2] * st.dphi[i] * st.dphi[i] + v * st.d2phi[i];
        let chz = v * st.dphi[i];
        let cxz = t[1] * st.dmu[i] * st.dphi[i];
        for r in 0..q {
            for s in 0..q {
                h[(p + r, p + s)] -= czz * z[r] * z[s] + chz * st.zhess[i][(r, s)];
            }
            for s in 0..p {
                h[(s, p + r)] -= cxz * x[s] * z[r];
                h[(p + r, s)] -= cxz * x[s] * z[r];
            }
        }
    }
    Ok(h)
}

/// Step-direction rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// Fisher scoring with the block-diagonal expected information only.
    Scoring,
    /// Newton steps on the observed information whenever it is positive
    /// definite and the step improves the likelihood; scoring otherwise.
    #[default]
    ScoringNewton,
}

struct Point {
    beta: Vec<f64>,
    theta: Vec<f64>,
    loglik: f64,
}

enum Search {
    Accepted(Point),
    NoIncrease,
    DomainEscape,
}

fn line_search(
    model: &ModelSpec,
    data: &Dataset,
    cur: &Point,
    db: &[f64],
    dt: &[f64],
    opts: &FitOptions,
) -> Result<Search> {
    let tol = 1e-12 * (1.0 + cur.loglik.abs());
    let mut step = 1.0;
    let mut any_finite = false;
    for _ in 0..=opts.max_halvings {
        let beta: Vec<f64> = cur.beta.iter().zip(db).map(|(b, d)| b + step * d).collect();
        let theta: Vec<f64> = cur.theta.iter().zip(dt).map(|(t, d)| t + step * d).collect();
        match loglik(model, data, &beta, &theta) {
            Ok(ll) if ll.is_finite() => {
                any_finite = true;
                if ll >= cur.loglik - tol {
                    return Ok(Search::Accepted(Point { beta, theta, loglik: ll }));
                }
            }
            Ok(_) => {}
            Err(Error::Domain { .. }) | Err(Error::RowDomain { .. }) => {}
            Err(e) => return Err(e),
        }
        step *= 0.5;
    }
    Ok(if any_finite { Search::NoIncrease } else { Search::DomainEscape })
}

fn solve_pd(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<Vec<f64>> {
    if m.nrows() == 0 {
        return Some(Vec::new());
    }
    let chol = m.clone().cholesky()?;
    let x = chol.solve(rhs);
    x.iter().all(|v| v.is_finite()).then(|| x.iter().cloned().collect())
}

/// Candidate directions for one block selection, Newton first when allowed.
fn directions(
    model: &ModelSpec,
    data: &Dataset,
    st: &DesignState,
    ub: &DVector<f64>,
    ut: &DVector<f64>,
    blocks: (bool, bool),
    opts: &FitOptions,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let (p, q) = (model.p(), model.q());
    let mut out = Vec::with_capacity(2);
    if opts.step == StepRule::ScoringNewton {
        let h = observed_information(model, data, st)?;
        let newton = match blocks {
            (true, true) => {
                let u = DVector::from_iterator(p + q, ub.iter().chain(ut.iter()).cloned());
                solve_pd(&h, &u).map(|d| (d[..p].to_vec(), d[p..].to_vec()))
            }
            (true, false) => solve_pd(&h.view((0, 0), (p, p)).into_owned(), ub).map(|d| (d, vec![0.0; q])),
            _ => solve_pd(&h.view((p, p), (q, q)).into_owned(), ut).map(|d| (vec![0.0; p], d)),
        };
        out.extend(newton);
    }
    let info = information_from_design(model, st)?;
    let db: Vec<f64> = if blocks.0 {
        (spd_inverse(&info.k_beta, "K_beta")? * ub).iter().cloned().collect()
    } else {
        vec![0.0; p]
    };
    let dt: Vec<f64> = if blocks.1 {
        (spd_inverse(&info.k_theta, "K_theta")? * ut).iter().cloned().collect()
    } else {
        vec![0.0; q]
    };
    out.push((db, dt));
    Ok(out)
}

fn relative_change(cur: &Point, db: &[f64], dt: &[f64]) -> f64 {
    cur.beta
        .iter()
        .zip(db)
        .chain(cur.theta.iter().zip(dt))
        .fold(0.0_f64, |m, (z, d)| m.max(d.abs() / z.abs().max(1.0)))
}

/// One improving step over the selected blocks, trying each candidate
/// direction in turn.
fn block_step(
    model: &ModelSpec,
    data: &Dataset,
    cur: &Point,
    st: &DesignState,
    blocks: (bool, bool),
    opts: &FitOptions,
) -> Result<(Search, f64)> {
    let (_, ub, ut) = score_parts(model, data, st)?;
    let mut last = Search::NoIncrease;
    let mut rel = f64::INFINITY;
    let mut escaped = true;
    for (k, (db, dt)) in directions(model, data, st, &ub, &ut, blocks, opts)?.into_iter().enumerate() {
        if k == 0 {
            rel = relative_change(cur, &db, &dt);
        }
        match line_search(model, data, cur, &db, &dt, opts)? {
            Search::Accepted(pt) => return Ok((Search::Accepted(pt), rel)),
            Search::NoIncrease => {
                escaped = false;
                last = Search::NoIncrease;
            }
            Search::DomainEscape => {
                if escaped {
                    last = Search::DomainEscape;
                }
            }
        }
    }
    Ok((last, rel))
}

/// Fits with default options.
pub fn fit_mle(model: &ModelSpec, data: &Dataset, init: Option<(&[f64], &[f64])>) -> Result<FitResult> {
    fit_mle_with(model, data, init, &FitOptions::default())
}

/// Maximum-likelihood fit from `init` (or the data-driven starts). When
/// `opts.restarts` is set and a start does not converge, the remaining
/// [`start_candidates`] are tried in order; the first converged fit is
/// returned, else the outcome of the first attempt.
pub fn fit_mle_with(
    model: &ModelSpec,
    data: &Dataset,
    init: Option<(&[f64], &[f64])>,
    opts: &FitOptions,
) -> Result<FitResult> {
    if !model.family.has_likelihood() {
        return Err(Error::Unsupported(format!("family {} has no closed-form likelihood", model.family)));
    }
    let mut first: Option<Result<FitResult>> = None;
    if let Some((b, t)) = init {
        let r = fit_from(model, data, b.to_vec(), t.to_vec(), opts);
        if !opts.restarts || matches!(&r, Ok(f) if f.converged) {
            return r;
        }
        first = Some(r);
    }
    let starts = match start_candidates(model, data) {
        Ok(s) => s,
        Err(e) => return first.unwrap_or(Err(e)),
    };
    for (b, t) in starts {
        let r = fit_from(model, data, b, t, opts);
        if !opts.restarts || matches!(&r, Ok(f) if f.converged) {
            return r;
        }
        first.get_or_insert(r);
    }
    first.unwrap_or(Err(Error::DomainEscape))
}

fn fit_from(model: &ModelSpec, data: &Dataset, beta0: Vec<f64>, theta0: Vec<f64>, opts: &FitOptions) -> Result<FitResult> {
    let mut st = design_build(model, data, &beta0, &theta0)?;
    let (ll0, ub, ut) = score_parts(model, data, &st)?;
    let mut cur = Point {
        beta: beta0,
        theta: theta0,
        loglik: ll0,
    };
    let mut trace = vec![ll0];
    let mut converged = false;
    let mut iterations = 0;
    let inf_norm = |a: &DVector<f64>, b: &DVector<f64>| a.iter().chain(b.iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut score_norm = inf_norm(&ub, &ut);
    let has_theta = model.q() > 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let (outcome, rel) = match opts.update {
            UpdateScheme::Joint => block_step(model, data, &cur, &st, (true, has_theta), opts)?,
            UpdateScheme::Alternating => {
                let (first, rel_b) = block_step(model, data, &cur, &st, (true, false), opts)?;
                if !has_theta {
                    (first, rel_b)
                } else {
                    let (mid, mid_st) = match first {
                        Search::Accepted(pt) => {
                            let s2 = design_eval(model, data, &pt.beta, &pt.theta)?;
                            (pt, s2)
                        }
                        _ => (
                            Point {
                                beta: cur.beta.clone(),
                                theta: cur.theta.clone(),
                                loglik: cur.loglik,
                            },
                            st.clone(),
                        ),
                    };
                    let (second, rel_t) = block_step(model, data, &mid, &mid_st, (false, true), opts)?;
                    let moved = mid.loglik > cur.loglik || mid.beta != cur.beta;
                    let outcome = match second {
                        Search::Accepted(pt) => Search::Accepted(pt),
                        other if !moved => other,
                        _ => Search::Accepted(mid),
                    };
                    (outcome, rel_b.max(rel_t))
                }
            }
        };
        if score_norm <= opts.score_tol && rel <= opts.step_tol {
            converged = true;
            break;
        }
        match outcome {
            Search::Accepted(pt) => {
                cur = pt;
                st = design_eval(model, data, &cur.beta, &cur.theta)?;
                let (ll, u1, u2) = score_parts(model, data, &st)?;
                cur.loglik = ll;
                trace.push(ll);
                score_norm = inf_norm(&u1, &u2);
            }
            Search::NoIncrease => {
                // no representable improvement; accept if already stationary
                converged = score_norm <= opts.score_tol;
                break;
            }
            Search::DomainEscape => {
                if score_norm <= opts.score_tol {
                    converged = true;
                    break;
                }
                return Err(Error::DomainEscape);
            }
        }
    }
    if converged && (rank(&st.xtilde) < model.p() || rank(&st.ztilde) < model.q()) {
        // stationary only in the limit, e.g. an exponent running off to infinity
        log::debug!("fit stopped where a derivative design matrix lost rank");
        converged = false;
    }
    let info = information_from_design(model, &st)?;
    Ok(FitResult {
        beta: cur.beta,
        theta: cur.theta,
        loglik: cur.loglik,
        k_beta_inv: spd_inverse(&info.k_beta, "K_beta")?,
        k_theta_inv: spd_inverse(&info.k_theta, "K_theta")?,
        iterations,
        converged,
        score_norm,
        loglik_trace: trace,
    })
}
