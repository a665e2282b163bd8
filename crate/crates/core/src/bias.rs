//! Second-order (Cox-Snell) bias of the maximum-likelihood estimates, the
//! bias-corrected estimates, and the induced biases of fitted means and
//! precisions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{weights, FitResult};
use crate::linalg::{spd_inverse, weighted_crossprod, weighted_least_squares, xt_vec};
use crate::model::{design_eval, Dataset, DesignState, ModelSpec};

/// Diagonal matrices (stored as vectors) entering the bias formulas.
#[derive(Debug, Clone)]
pub struct BiasMatrices {
    pub w_beta: Vec<f64>,
    pub w_theta: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub m3: Vec<f64>,
    /// `dmu/deta1`
    pub t1: Vec<f64>,
    /// `dphi/deta2`
    pub t2: Vec<f64>,
    /// `d2mu/deta1^2`
    pub s1: Vec<f64>,
    /// `d2phi/deta2^2`
    pub s2: Vec<f64>,
    /// `tr(Xtilde_i K^beta)`
    pub e_diag: Vec<f64>,
    /// `tr(Ztilde_i K^theta)`
    pub f_diag: Vec<f64>,
    /// diagonal of `Xtilde K^beta Xtilde^T`
    pub z_beta: Vec<f64>,
    /// diagonal of `Ztilde K^theta Ztilde^T`
    pub z_theta: Vec<f64>,
    pub k_beta_inv: DMatrix<f64>,
    pub k_theta_inv: DMatrix<f64>,
    pub phi: Vec<f64>,
    pub mu: Vec<f64>,
    pub design: DesignState,
}

fn quad_diag(x: &DMatrix<f64>, k: &DMatrix<f64>) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| {
            let row = x.row(i);
            let kr = k * row.transpose();
            row.iter().zip(kr.iter()).map(|(a, b)| a * b).sum()
        })
        .collect()
}

fn trace_prod(h: &DMatrix<f64>, k: &DMatrix<f64>) -> f64 {
    // tr(H K) = sum_rs H_rs K_sr
    h.iter().zip(k.transpose().iter()).map(|(a, b)| a * b).sum()
}

/// Evaluates every bias matrix at `(beta, theta)`.
pub fn bias_matrices(model: &ModelSpec, data: &Dataset, beta: &[f64], theta: &[f64]) -> Result<BiasMatrices> {
    let st = design_eval(model, data, beta, theta)?;
    let n = data.n();
    let q = model.q();
    let (w_beta, w_theta) = weights(model, &st)?;
    let phi_wb: Vec<f64> = w_beta.iter().zip(&st.phi).map(|(w, p)| w * p).collect();
    let k_beta_inv = spd_inverse(&weighted_crossprod(&st.xtilde, &phi_wb), "K_beta")?;
    let k_theta_inv = spd_inverse(&weighted_crossprod(&st.ztilde, &w_theta), "K_theta")?;
    let mut m1 = vec![0.0; n];
    let mut m2 = vec![0.0; if q > 0 { n } else { 0 }];
    let mut m3 = vec![0.0; if q > 0 { n } else { 0 }];
    for i in 0..n {
        let c = model.family.cumulants(st.mu[i], st.phi[i])?;
        let (t1, s1) = (st.dmu[i], st.d2mu[i]);
        m1[i] = 0.5 * ((2.0 * c.d2p - c.d3) * t1.powi(3) + c.d2 * t1 * s1);
        if q > 0 {
            let (t2, s2) = (st.dphi[i], st.d2phi[i]);
            m2[i] = 0.5 * ((2.0 * c.alpha2p - c.alpha3) * t2.powi(3) + c.alpha2 * t2 * s2);
            m3[i] = 0.5 * c.d2 * t1 * t1 * t2;
        }
    }
    let e_diag = if st.mean_linear {
        vec![0.0; n]
    } else {
        st.xhess.iter().map(|h| trace_prod(h, &k_beta_inv)).collect()
    };
    let f_diag = if q == 0 || st.disp_linear {
        vec![0.0; if q > 0 { n } else { 0 }]
    } else {
        st.zhess.iter().map(|h| trace_prod(h, &k_theta_inv)).collect()
    };
    let z_beta = quad_diag(&st.xtilde, &k_beta_inv);
    let z_theta = if q > 0 { quad_diag(&st.ztilde, &k_theta_inv) } else { Vec::new() };
    Ok(BiasMatrices {
        w_beta,
        w_theta,
        m1,
        m2,
        m3,
        t1: st.dmu.clone(),
        t2: if q > 0 { st.dphi.clone() } else { Vec::new() },
        s1: st.d2mu.clone(),
        s2: if q > 0 { st.d2phi.clone() } else { Vec::new() },
        e_diag,
        f_diag,
        z_beta,
        z_theta,
        k_beta_inv,
        k_theta_inv,
        phi: st.phi.clone(),
        mu: st.mu.clone(),
        design: st,
    })
}

/// Mean-block bias with its split into the part from `omega` and the part
/// from the predictor curvature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaBias {
    pub b_beta: Vec<f64>,
    pub b1_beta: Vec<f64>,
    pub b2_beta: Vec<f64>,
    /// Same bias as the coefficients of the weighted regression of `xi_beta`.
    pub b_beta_regression: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaBias {
    pub b_theta: Vec<f64>,
    pub q1_theta: Vec<f64>,
    pub q2_theta: Vec<f64>,
    pub b_theta_regression: Vec<f64>,
}

fn to_vec(v: DVector<f64>) -> Vec<f64> {
    v.iter().cloned().collect()
}

pub fn bias_beta(m: &BiasMatrices) -> Result<BetaBias> {
    let x = &m.design.xtilde;
    let n = x.nrows();
    let lin: Vec<f64> = (0..n).map(|i| m.phi[i] * m.m1[i] * m.z_beta[i]).collect();
    let curv: Vec<f64> = (0..n).map(|i| -0.5 * m.phi[i] * m.w_beta[i] * m.e_diag[i]).collect();
    let b1 = to_vec(&m.k_beta_inv * xt_vec(x, &lin));
    let b2 = to_vec(&m.k_beta_inv * xt_vec(x, &curv));
    let b: Vec<f64> = b1.iter().zip(&b2).map(|(a, c)| a + c).collect();
    // xi = omega - E/2 with omega = W^-1 M1 Z_beta, weights Phi W_beta
    if m.w_beta.iter().any(|&w| w == 0.0) {
        return Err(Error::Singular("zero mean-block weight".into()));
    }
    let xi: Vec<f64> = (0..n).map(|i| m.m1[i] * m.z_beta[i] / m.w_beta[i] - 0.5 * m.e_diag[i]).collect();
    let wts: Vec<f64> = (0..n).map(|i| m.phi[i] * m.w_beta[i]).collect();
    let reg = to_vec(weighted_least_squares(x, &wts, &xi)?);
    Ok(BetaBias {
        b_beta: b,
        b1_beta: b1,
        b2_beta: b2,
        b_beta_regression: reg,
    })
}

pub fn bias_theta(m: &BiasMatrices) -> Result<ThetaBias> {
    let z = &m.design.ztilde;
    if z.ncols() == 0 {
        return Ok(ThetaBias {
            b_theta: Vec::new(),
            q1_theta: Vec::new(),
            q2_theta: Vec::new(),
            b_theta_regression: Vec::new(),
        });
    }
    let n = z.nrows();
    let lin: Vec<f64> = (0..n).map(|i| m.m2[i] * m.z_theta[i] - m.m3[i] * m.z_beta[i]).collect();
    let curv: Vec<f64> = (0..n).map(|i| -0.5 * m.w_theta[i] * m.f_diag[i]).collect();
    let q1 = to_vec(&m.k_theta_inv * xt_vec(z, &lin));
    let q2 = to_vec(&m.k_theta_inv * xt_vec(z, &curv));
    let b: Vec<f64> = q1.iter().zip(&q2).map(|(a, c)| a + c).collect();
    if m.w_theta.iter().any(|&w| w == 0.0) {
        return Err(Error::Singular("zero dispersion-block weight".into()));
    }
    let xi: Vec<f64> = (0..n).map(|i| lin[i] / m.w_theta[i] - 0.5 * m.f_diag[i]).collect();
    let reg = to_vec(weighted_least_squares(z, &m.w_theta, &xi)?);
    Ok(ThetaBias {
        b_theta: b,
        q1_theta: q1,
        q2_theta: q2,
        b_theta_regression: reg,
    })
}

/// `zeta_tilde = zeta_hat - B(zeta_hat)`, applied once.
pub fn corrected_parameters(fit: &FitResult, b_beta: &[f64], b_theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let beta = fit.beta.iter().zip(b_beta).map(|(z, b)| z - b).collect();
    let theta = fit.theta.iter().zip(b_theta).map(|(z, b)| z - b).collect();
    (beta, theta)
}

/// Where the parameter bias feeding the fitted-value bias comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasSource {
    Analytic,
    ParametricBoot,
    NonparametricBoot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuPhiBias {
    pub source: BiasSource,
    pub b_mu: Vec<f64>,
    pub b_phi: Vec<f64>,
    pub mu_tilde: Vec<f64>,
    pub phi_tilde: Vec<f64>,
}

/// Biases of the fitted `mu` and `phi`. Bootstrap sources take the bootstrap
/// parameter bias `(beta block, theta block)` in `boot_bias`; the curvature
/// terms are always the analytic ones.
pub fn bias_mu_phi(
    m: &BiasMatrices,
    source: BiasSource,
    analytic: Option<(&[f64], &[f64])>,
    boot_bias: Option<&[f64]>,
) -> Result<MuPhiBias> {
    let p = m.design.xtilde.ncols();
    let q = m.design.ztilde.ncols();
    let (bb, bt): (Vec<f64>, Vec<f64>) = match source {
        BiasSource::Analytic => {
            let (b, t) = analytic.ok_or_else(|| Error::InvalidConfig("analytic bias source needs B(beta), B(theta)".into()))?;
            (b.to_vec(), t.to_vec())
        }
        _ => {
            let z = boot_bias.ok_or_else(|| Error::InvalidConfig("bootstrap bias source needs a bootstrap bias".into()))?;
            if z.len() != p + q {
                return Err(Error::Dimension(format!("bootstrap bias has {} entries, expected {}", z.len(), p + q)));
            }
            (z[..p].to_vec(), z[p..].to_vec())
        }
    };
    let n = m.mu.len();
    let xb = &m.design.xtilde * DVector::from_vec(bb);
    let b_mu: Vec<f64> = (0..n)
        .map(|i| 0.5 * m.t1[i] * (2.0 * xb[i] + m.e_diag[i]) + 0.5 * m.s1[i] * m.z_beta[i])
        .collect();
    let b_phi: Vec<f64> = if q > 0 {
        let zt = &m.design.ztilde * DVector::from_vec(bt);
        (0..n)
            .map(|i| 0.5 * m.t2[i] * (2.0 * zt[i] + m.f_diag[i]) + 0.5 * m.s2[i] * m.z_theta[i])
            .collect()
    } else {
        vec![0.0; n]
    };
    Ok(MuPhiBias {
        source,
        mu_tilde: m.mu.iter().zip(&b_mu).map(|(a, b)| a - b).collect(),
        phi_tilde: m.phi.iter().zip(&b_phi).map(|(a, b)| a - b).collect(),
        b_mu,
        b_phi,
    })
}

/// Complete analytic bias report at a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub beta: BetaBias,
    pub theta: ThetaBias,
    pub mu_phi: MuPhiBias,
    pub beta_tilde: Vec<f64>,
    pub theta_tilde: Vec<f64>,
    /// Largest absolute difference between the direct and regression forms.
    pub max_form_discrepancy: f64,
}

impl BiasReport {
    pub fn b_zeta(&self) -> Vec<f64> {
        self.beta.b_beta.iter().chain(&self.theta.b_theta).cloned().collect()
    }

    pub fn zeta_tilde(&self) -> Vec<f64> {
        self.beta_tilde.iter().chain(&self.theta_tilde).cloned().collect()
    }
}

/// Analytic bias of every quantity at `(beta, theta)`, with corrections
/// applied to those values.
pub fn cox_snell_at(model: &ModelSpec, data: &Dataset, beta: &[f64], theta: &[f64]) -> Result<BiasReport> {
    let m = bias_matrices(model, data, beta, theta)?;
    let bb = bias_beta(&m)?;
    let bt = bias_theta(&m)?;
    let mu_phi = bias_mu_phi(&m, BiasSource::Analytic, Some((&bb.b_beta, &bt.b_theta)), None)?;
    let disc = bb
        .b_beta
        .iter()
        .zip(&bb.b_beta_regression)
        .chain(bt.b_theta.iter().zip(&bt.b_theta_regression))
        .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
    Ok(BiasReport {
        beta_tilde: beta.iter().zip(&bb.b_beta).map(|(z, b)| z - b).collect(),
        theta_tilde: theta.iter().zip(&bt.b_theta).map(|(z, b)| z - b).collect(),
        beta: bb,
        theta: bt,
        mu_phi,
        max_form_discrepancy: disc,
    })
}

/// Analytic bias report at the MLE.
pub fn cox_snell(model: &ModelSpec, data: &Dataset, fit: &FitResult) -> Result<BiasReport> {
    cox_snell_at(model, data, &fit.beta, &fit.theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::Family;
    use crate::links::Link;
    use crate::specialfns::{bessel_ratio, ln_gamma, polygamma};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn rows(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| vec![rng.random::<f64>() * 0.98 + 0.01, rng.random::<f64>() * 0.98 + 0.01]).collect()
    }

    fn data(n: usize, seed: u64) -> Dataset {
        Dataset::new(vec![1.0; n], rows(n, seed), names(&["x1", "x2"])).unwrap()
    }

    #[test]
    fn normal_identity_linear_has_zero_bias() {
        let model =
            ModelSpec::from_exprs(Family::Normal, Link::Identity, Link::Log, "b0 + b1*x1 + b2*x2", Some("t0 + t1*x1"), &names(&["x1", "x2"]))
                .unwrap();
        let r = cox_snell_at(&model, &data(30, 1), &[0.2, 0.5, -1.0], &[0.3, 0.4]).unwrap();
        assert!(r.beta.b_beta.iter().all(|&b| b == 0.0));
        assert!(r.mu_phi.b_mu.iter().all(|&b| b == 0.0));
        assert!(r.beta.b2_beta.iter().all(|&b| b == 0.0));
        assert!(r.theta.q2_theta.iter().all(|&b| b == 0.0));
        // the precision block still has an O(1/n) bias
        assert!(r.theta.b_theta.iter().any(|&b| b != 0.0));
    }

    #[test]
    fn glm_reduction_of_m1() {
        let model = ModelSpec::from_exprs(Family::Gamma, Link::Log, Link::Log, "b0 + b1*x1", Some("t0"), &names(&["x1", "x2"])).unwrap();
        let m = bias_matrices(&model, &data(20, 2), &[0.3, 0.7], &[0.5]).unwrap();
        for i in 0..20 {
            let mu = m.mu[i];
            let (v, _, _) = Family::Gamma.variance_function(mu).unwrap();
            // log link: dmu/deta = d2mu/deta2 = mu
            let expected = -0.5 / v * mu * mu;
            assert!((m.m1[i] - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn von_mises_m3() {
        let model =
            ModelSpec::from_exprs(Family::VonMises, Link::Tangent, Link::Log, "b0 + b1*x1", Some("t0 + t1*x2"), &names(&["x1", "x2"]))
                .unwrap();
        let m = bias_matrices(&model, &data(15, 3), &[0.1, 0.4], &[0.5, 0.8]).unwrap();
        for i in 0..15 {
            let r = bessel_ratio(m.phi[i]).unwrap().r;
            let expected = -r / 2.0 * m.t1[i].powi(2) * m.t2[i];
            assert_relative_eq!(m.m3[i], expected, max_relative = 1e-14);
        }
    }

    fn section6_model() -> ModelSpec {
        ModelSpec::from_exprs(
            Family::ReciprocalGamma,
            Link::Sqrt,
            Link::Log,
            "b0 + b1*x1 + x2^b2",
            Some("t0 + t1*x1 + x2^t2"),
            &names(&["x1", "x2"]),
        )
        .unwrap()
    }

    #[test]
    fn direct_and_regression_forms_agree() {
        let r = cox_snell_at(&section6_model(), &data(20, 4), &[0.5, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(r.max_form_discrepancy <= 1e-10, "{}", r.max_form_discrepancy);
        for j in 0..3 {
            assert_eq!(r.beta.b_beta[j], r.beta.b1_beta[j] + r.beta.b2_beta[j]);
            assert_eq!(r.theta.b_theta[j], r.theta.q1_theta[j] + r.theta.q2_theta[j]);
        }
        assert!(r.beta.b2_beta.iter().any(|&b| b != 0.0));
        assert!(r.theta.q2_theta.iter().any(|&b| b != 0.0));
    }

    #[test]
    fn log_link_mean_bias_identity() {
        let model = ModelSpec::from_exprs(Family::Gamma, Link::Log, Link::Log, "b0 + x2^b1", Some("t0 + t1*x1"), &names(&["x1", "x2"])).unwrap();
        let d = data(25, 5);
        let r = cox_snell_at(&model, &d, &[0.2, 1.5], &[1.0, 0.5]).unwrap();
        let m = bias_matrices(&model, &d, &[0.2, 1.5], &[1.0, 0.5]).unwrap();
        let xb = &m.design.xtilde * DVector::from_vec(r.beta.b_beta.clone());
        for i in 0..25 {
            let expected = m.mu[i] * (xb[i] + 0.5 * m.e_diag[i] + 0.5 * m.z_beta[i]);
            assert_relative_eq!(r.mu_phi.b_mu[i], expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn bias_scales_inversely_with_sample_size() {
        let model = section6_model();
        let base = data(20, 6);
        let (b, t) = ([0.5, 1.0, 2.0], [1.0, 2.0, 3.0]);
        let norm = |k: usize| {
            let r = cox_snell_at(&model, &base.replicate(k), &b, &t).unwrap();
            r.b_zeta().iter().map(|v| v * v).sum::<f64>().sqrt()
        };
        let b1 = norm(1);
        for k in [2usize, 4, 8] {
            let ratio = norm(k) * k as f64 / b1;
            assert!((ratio - 1.0).abs() < 0.1, "k = {k}: ratio {ratio}");
        }
    }

    #[test]
    fn corrected_parameters_subtract_once() {
        let fit = FitResult {
            beta: vec![1.0, 2.0],
            theta: vec![3.0],
            loglik: 0.0,
            k_beta_inv: DMatrix::identity(2, 2),
            k_theta_inv: DMatrix::identity(1, 1),
            iterations: 1,
            converged: true,
            score_norm: 0.0,
            loglik_trace: vec![],
        };
        let (b, t) = corrected_parameters(&fit, &[0.1, -0.2], &[0.5]);
        assert_eq!(b, vec![0.9, 2.2]);
        assert_eq!(t, vec![2.5]);
        let (b0, t0) = corrected_parameters(&fit, &[0.0, 0.0], &[0.0]);
        assert_eq!((b0, t0), (fit.beta.clone(), fit.theta.clone()));
    }

    #[test]
    fn bootstrap_source_requires_input() {
        let model = section6_model();
        let m = bias_matrices(&model, &data(20, 7), &[0.5, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(bias_mu_phi(&m, BiasSource::ParametricBoot, None, None).is_err());
        assert!(bias_mu_phi(&m, BiasSource::Analytic, None, None).is_err());
        let zero = bias_mu_phi(&m, BiasSource::NonparametricBoot, None, Some(&[0.0; 6])).unwrap();
        let analytic_zero = bias_mu_phi(&m, BiasSource::Analytic, Some((&[0.0; 3], &[0.0; 3])), None).unwrap();
        assert_eq!(zero.b_mu, analytic_zero.b_mu);
        assert_eq!(zero.b_phi, analytic_zero.b_phi);
    }

    /// Expected log-likelihood `E_zeta0 l(zeta)` written out in closed form
    /// for the gamma and von Mises families.
    fn expected_loglik(model: &ModelSpec, d: &Dataset, zeta0: &[f64], zeta: &[f64]) -> f64 {
        let p = model.p();
        let (mu0, phi0) = crate::model::mu_phi(model, d, &zeta0[..p], &zeta0[p..]).unwrap();
        let (mu, phi) = crate::model::mu_phi(model, d, &zeta[..p], &zeta[p..]).unwrap();
        (0..d.n())
            .map(|i| match model.family {
                Family::Gamma => {
                    // E log y under Gamma(shape phi0, mean mu0)
                    let elog = polygamma(0, phi0[i]).unwrap() - (phi0[i] / mu0[i]).ln();
                    phi[i] * (elog - mu[i].ln() - mu0[i] / mu[i]) + phi[i] * phi[i].ln() - ln_gamma(phi[i]).unwrap() - elog
                }
                Family::VonMises => {
                    // E cos(y - mu) = r(phi0) cos(mu0 - mu)
                    let r0 = bessel_ratio(phi0[i]).unwrap().r;
                    phi[i] * r0 * (mu0[i] - mu[i]).cos() - crate::specialfns::ln_bessel_i0(phi[i]).unwrap()
                }
                _ => unimplemented!(),
            })
            .sum()
    }

    /// Generic index-sum form of the bias, with derivatives of the expected
    /// log-likelihood taken by central differences of step `h`.
    fn index_sum_bias(model: &ModelSpec, d: &Dataset, zeta0: &[f64], h: f64) -> Vec<f64> {
        let k = zeta0.len();
        let lam = |z: &[f64]| expected_loglik(model, d, zeta0, z);
        // kappa_rt as a function of the point at which it is evaluated
        let kappa2 = |z: &[f64]| -> DMatrix<f64> {
            let f = |zz: &[f64]| expected_loglik(model, d, z, zz);
            DMatrix::from_fn(k, k, |r, t| {
                let mut acc = 0.0;
                for (sr, st) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    let mut zz = z.to_vec();
                    zz[r] += sr * h;
                    zz[t] += st * h;
                    acc += sr * st * f(&zz);
                }
                acc / (4.0 * h * h)
            })
        };
        let kinv = (-kappa2(zeta0)).try_inverse().unwrap();
        let dk: Vec<DMatrix<f64>> = (0..k)
            .map(|u| {
                let mut zp = zeta0.to_vec();
                let mut zm = zeta0.to_vec();
                zp[u] += h;
                zm[u] -= h;
                (kappa2(&zp) - kappa2(&zm)) / (2.0 * h)
            })
            .collect();
        let mut bias = vec![0.0; k];
        for r in 0..k {
            for t in 0..k {
                for u in 0..k {
                    let mut k3 = 0.0;
                    for sr in [1.0, -1.0] {
                        for st in [1.0, -1.0] {
                            for su in [1.0, -1.0] {
                                let mut zz = zeta0.to_vec();
                                zz[r] += sr * h;
                                zz[t] += st * h;
                                zz[u] += su * h;
                                k3 += sr * st * su * lam(&zz);
                            }
                        }
                    }
                    k3 /= 8.0 * h * h * h;
                    let term = dk[u][(r, t)] - 0.5 * k3;
                    for a in 0..k {
                        bias[a] += kinv[(a, r)] * kinv[(t, u)] * term;
                    }
                }
            }
        }
        bias
    }

    #[test]
    fn matches_index_sum_oracle() {
        let model = ModelSpec::from_exprs(Family::Gamma, Link::Log, Link::Log, "b0 + b1*x1 + x2^b2", Some("t0 + x1^t1"), &names(&["x1", "x2"]))
            .unwrap();
        let d = data(15, 8);
        let zeta0 = [0.3, 0.8, 1.5, 1.2, 0.7];
        // Richardson extrapolation removes the O(h^2) difference error
        let coarse = index_sum_bias(&model, &d, &zeta0, 4e-3);
        let fine = index_sum_bias(&model, &d, &zeta0, 2e-3);
        let r = cox_snell_at(&model, &d, &zeta0[..3], &zeta0[3..]).unwrap();
        for (a, got) in r.b_zeta().iter().enumerate() {
            let oracle = (4.0 * fine[a] - coarse[a]) / 3.0;
            assert!((oracle - got).abs() <= 5e-5 * oracle.abs().max(1e-2), "param {a}: oracle {oracle} vs {got}");
        }
    }

    /// The von Mises mean-block cumulant depends on the precision, which
    /// exercises the cross terms of the index sum.
    #[test]
    fn von_mises_matches_index_sum_oracle() {
        let model = ModelSpec::from_exprs(Family::VonMises, Link::Tangent, Link::Log, "b0 + b1*x1", Some("t0 + t1*x2"), &names(&["x1", "x2"]))
            .unwrap();
        let d = data(12, 9);
        let zeta0 = [0.2, 0.5, 1.0, 0.6];
        let coarse = index_sum_bias(&model, &d, &zeta0, 4e-3);
        let fine = index_sum_bias(&model, &d, &zeta0, 2e-3);
        let r = cox_snell_at(&model, &d, &zeta0[..2], &zeta0[2..]).unwrap();
        for (a, got) in r.b_zeta().iter().enumerate() {
            let oracle = (4.0 * fine[a] - coarse[a]) / 3.0;
            assert!((oracle - got).abs() <= 5e-5 * oracle.abs().max(1e-2), "param {a}: oracle {oracle} vs {got}");
        }
    }
}
