//! Dispersion-model families with density `exp{phi t(y, mu) + a(phi, y)}`.
//!
//! Each family provides `t` and `a` with their derivatives, the expected
//! derivative cumulants `d2 = E[t'']`, `d3 = E[t''']`, `d2' = dd2/dmu` and
//! `alpha_r = E[d^r a / dphi^r]`, and (for most entries) a sampler.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma, InverseGaussian, LogNormal, Normal, Open01, Poisson, Weibull};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::specialfns::{bessel_ratio, ln_bessel_i0, ln_gamma, polygamma};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    ExponentialDispersion,
    ProperDispersion,
    ConstantCv,
}

/// The family catalog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Normal,
    Poisson,
    /// Proportions out of `trials`; the precision is fixed at `trials`.
    Binomial { trials: u32 },
    Gamma,
    InverseGaussian,
    VonMises,
    /// Proper dispersion model with `t = log(mu/y) - mu/y`, so `1/Y` is gamma
    /// with shape `phi` and mean `1/mu`.
    ReciprocalGamma,
    LogGamma,
    /// Proper dispersion model with `t = -(y - mu)^2 / (2y)`; `1/Y` is inverse
    /// Gaussian with mean `1/mu` and shape `phi`.
    ReciprocalInverseGaussian,
    /// Generalized hyperbolic secant, `V(mu) = 1 + mu^2`. Cumulants only.
    Ghs,
    /// Negative binomial cumulant entries kept verbatim, including their mix of
    /// `(1 - mu)` and `(1 + mu)` factors; no variance function reproduces them
    /// all, so this is kept apart from the samplable set. Cumulants only.
    NegativeBinomialAsPublished,
    /// Tweedie family `V(mu) = mu^p`. Likelihood and sampler for `p` in {0, 2, 3}.
    PowerVariance(f64),
    /// `V(mu) = exp(b mu)`. Cumulants only.
    ExponentialVariance(f64),
    /// `N(mu, c^2 mu^2)`
    CvNormal(f64),
    /// `IG(mu, c^2 mu^2)`
    CvInverseGaussian(f64),
    /// `LN(mu, c^2 mu^2)`
    CvLognormal(f64),
    /// Weibull with mean `mu` and shape `c`.
    CvWeibull(f64),
}

/// `t(y, mu)`, `dt/dmu`, `a(phi, y)`, `da/dphi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoglikTerms {
    pub t: f64,
    pub tprime: f64,
    pub a: f64,
    pub aprime: f64,
}

/// Expected derivatives of `t` (in `mu`) and `a` (in `phi`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantEval {
    pub d2: f64,
    pub d3: f64,
    pub d2p: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha2p: f64,
}

fn tweedie_exact(p: f64) -> Option<u8> {
    [0u8, 2, 3].into_iter().find(|&k| p == k as f64)
}

/// `t` and its three `mu`-derivatives for an exponential dispersion model
/// with variance function `V`, given `V`, `V'`, `V''` and `t` itself.
fn edm_t_derivs(y: f64, mu: f64, t: f64, v: f64, v1: f64, v2: f64) -> [f64; 4] {
    let r = y - mu;
    [
        t,
        r / v,
        -1.0 / v - r * v1 / (v * v),
        2.0 * v1 / (v * v) + r * (2.0 * v1 * v1 - v * v2) / (v * v * v),
    ]
}

fn gamma_a1_derivs(phi: f64) -> Result<[f64; 3]> {
    // a1(phi) = phi log phi - log Gamma(phi)
    Ok([
        phi.ln() + 1.0 - polygamma(0, phi)?,
        1.0 / phi - polygamma(1, phi)?,
        -1.0 / (phi * phi) - polygamma(2, phi)?,
    ])
}

impl Family {
    pub fn name(&self) -> String {
        match self {
            Family::Normal => "normal".into(),
            Family::Poisson => "poisson".into(),
            Family::Binomial { trials: 1 } => "binomial".into(),
            Family::Binomial { trials } => format!("binomial({trials})"),
            Family::Gamma => "gamma".into(),
            Family::InverseGaussian => "inverse-gaussian".into(),
            Family::VonMises => "von-mises".into(),
            Family::ReciprocalGamma => "reciprocal-gamma".into(),
            Family::LogGamma => "log-gamma".into(),
            Family::ReciprocalInverseGaussian => "reciprocal-inverse-gaussian".into(),
            Family::Ghs => "ghs".into(),
            Family::NegativeBinomialAsPublished => "negative-binomial-as-published".into(),
            Family::PowerVariance(p) => format!("power-variance({p})"),
            Family::ExponentialVariance(b) => format!("exponential-variance({b})"),
            Family::CvNormal(c) => format!("cv-normal({c})"),
            Family::CvInverseGaussian(c) => format!("cv-inverse-gaussian({c})"),
            Family::CvLognormal(c) => format!("cv-lognormal({c})"),
            Family::CvWeibull(c) => format!("cv-weibull({c})"),
        }
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            Family::Normal
            | Family::Poisson
            | Family::Binomial { .. }
            | Family::Gamma
            | Family::InverseGaussian
            | Family::Ghs
            | Family::NegativeBinomialAsPublished
            | Family::PowerVariance(_)
            | Family::ExponentialVariance(_) => FamilyKind::ExponentialDispersion,
            Family::VonMises
            | Family::ReciprocalGamma
            | Family::LogGamma
            | Family::ReciprocalInverseGaussian => FamilyKind::ProperDispersion,
            Family::CvNormal(_) | Family::CvInverseGaussian(_) | Family::CvLognormal(_) | Family::CvWeibull(_) => {
                FamilyKind::ConstantCv
            }
        }
    }

    /// Precision held fixed by the family; such families take no dispersion predictor.
    pub fn fixed_phi(&self) -> Option<f64> {
        match self {
            Family::Poisson => Some(1.0),
            Family::Binomial { trials } => Some(*trials as f64),
            Family::CvNormal(_) | Family::CvInverseGaussian(_) | Family::CvLognormal(_) | Family::CvWeibull(_) => {
                Some(1.0)
            }
            _ => None,
        }
    }

    /// Variance function `(V, V', V'')` for exponential dispersion families.
    pub fn variance_function(&self, mu: f64) -> Option<(f64, f64, f64)> {
        match *self {
            Family::Normal => Some((1.0, 0.0, 0.0)),
            Family::Poisson => Some((mu, 1.0, 0.0)),
            Family::Binomial { .. } => Some((mu * (1.0 - mu), 1.0 - 2.0 * mu, -2.0)),
            Family::Gamma => Some((mu * mu, 2.0 * mu, 2.0)),
            Family::InverseGaussian => Some((mu.powi(3), 3.0 * mu * mu, 6.0 * mu)),
            Family::Ghs => Some((1.0 + mu * mu, 2.0 * mu, 2.0)),
            Family::PowerVariance(p) => Some((mu.powf(p), p * mu.powf(p - 1.0), p * (p - 1.0) * mu.powf(p - 2.0))),
            Family::ExponentialVariance(b) => {
                let v = (b * mu).exp();
                Some((v, b * v, b * b * v))
            }
            _ => None,
        }
    }

    /// Open interval of admissible `mu`.
    pub fn mu_domain(&self) -> (f64, f64) {
        match self {
            Family::Normal | Family::LogGamma | Family::Ghs | Family::ExponentialVariance(_) => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            Family::VonMises => (f64::NEG_INFINITY, f64::INFINITY),
            Family::PowerVariance(p) if *p == 0.0 => (f64::NEG_INFINITY, f64::INFINITY),
            Family::Binomial { .. } | Family::NegativeBinomialAsPublished => (0.0, 1.0),
            _ => (0.0, f64::INFINITY),
        }
    }

    pub fn check_mu(&self, mu: f64) -> Result<()> {
        let (lo, hi) = self.mu_domain();
        if mu.is_finite() && mu > lo && mu < hi {
            Ok(())
        } else {
            Err(domain("family", format!("mu = {mu} outside the {} domain", self.name())))
        }
    }

    pub fn check_phi(&self, phi: f64) -> Result<()> {
        if phi.is_finite() && phi > 0.0 {
            Ok(())
        } else {
            Err(domain("family", format!("phi = {phi} must be positive")))
        }
    }

    /// Whether `y` lies in the support of the response.
    pub fn check_y(&self, y: f64) -> Result<()> {
        let ok = y.is_finite()
            && match self {
                Family::Poisson => y >= 0.0 && y.fract() == 0.0,
                Family::Binomial { trials } => {
                    let k = y * *trials as f64;
                    (0.0..=1.0).contains(&y) && (k - k.round()).abs() < 1e-9
                }
                Family::Gamma
                | Family::InverseGaussian
                | Family::ReciprocalGamma
                | Family::ReciprocalInverseGaussian
                | Family::CvInverseGaussian(_)
                | Family::CvLognormal(_)
                | Family::CvWeibull(_) => y > 0.0,
                Family::PowerVariance(p) if *p != 0.0 => y > 0.0,
                Family::VonMises => (-PI..=PI).contains(&y),
                _ => true,
            };
        if ok {
            Ok(())
        } else {
            Err(domain("family", format!("y = {y} outside the {} support", self.name())))
        }
    }

    /// Families with a closed-form `a(phi, y)` and hence a log-likelihood.
    pub fn has_likelihood(&self) -> bool {
        match self {
            Family::Ghs | Family::NegativeBinomialAsPublished | Family::ExponentialVariance(_) => false,
            Family::PowerVariance(p) => tweedie_exact(*p).is_some(),
            _ => true,
        }
    }

    pub fn is_samplable(&self) -> bool {
        self.has_likelihood()
    }

    /// `[t, t', t'', t''']` with derivatives in `mu`.
    pub fn t_derivs(&self, y: f64, mu: f64) -> Result<[f64; 4]> {
        self.check_mu(mu)?;
        Ok(match *self {
            Family::Normal => {
                let r = y - mu;
                [-0.5 * r * r, r, -1.0, 0.0]
            }
            Family::Poisson => [y * mu.ln() - mu, y / mu - 1.0, -y / (mu * mu), 2.0 * y / mu.powi(3)],
            Family::Binomial { .. } => {
                let q = 1.0 - mu;
                [
                    y * (mu / q).ln() + q.ln(),
                    (y - mu) / (mu * q),
                    -y / (mu * mu) - (1.0 - y) / (q * q),
                    2.0 * y / mu.powi(3) - 2.0 * (1.0 - y) / q.powi(3),
                ]
            }
            Family::Gamma => {
                let u = y / mu;
                [u.ln() - u, (u - 1.0) / mu, (1.0 - 2.0 * u) / (mu * mu), (6.0 * u - 2.0) / mu.powi(3)]
            }
            Family::InverseGaussian => {
                let r = y - mu;
                [
                    -r * r / (2.0 * mu * mu * y),
                    r / mu.powi(3),
                    -3.0 * y / mu.powi(4) + 2.0 / mu.powi(3),
                    12.0 * y / mu.powi(5) - 6.0 / mu.powi(4),
                ]
            }
            Family::VonMises => {
                let (s, c) = (y - mu).sin_cos();
                [c, s, -c, -s]
            }
            Family::ReciprocalGamma => {
                let u = mu / y;
                [u.ln() - u, 1.0 / mu - 1.0 / y, -1.0 / (mu * mu), 2.0 / mu.powi(3)]
            }
            Family::LogGamma => {
                let e = (y - mu).exp();
                [(y - mu) - e, e - 1.0, -e, e]
            }
            Family::ReciprocalInverseGaussian => {
                let r = y - mu;
                [-r * r / (2.0 * y), 1.0 - mu / y, -1.0 / y, 0.0]
            }
            Family::Ghs => {
                let (v, v1, v2) = self.variance_function(mu).unwrap();
                let t = y * mu.atan() - 0.5 * v.ln();
                edm_t_derivs(y, mu, t, v, v1, v2)
            }
            Family::PowerVariance(p) => {
                let (v, v1, v2) = self.variance_function(mu).unwrap();
                let t = if p == 1.0 {
                    y * mu.ln() - mu
                } else if p == 2.0 {
                    -y / mu - mu.ln()
                } else {
                    y * mu.powf(1.0 - p) / (1.0 - p) - mu.powf(2.0 - p) / (2.0 - p)
                };
                edm_t_derivs(y, mu, t, v, v1, v2)
            }
            Family::ExponentialVariance(b) => {
                let (v, v1, v2) = self.variance_function(mu).unwrap();
                let e = (-b * mu).exp();
                let t = -y * e / b + e * (mu / b + 1.0 / (b * b));
                edm_t_derivs(y, mu, t, v, v1, v2)
            }
            Family::NegativeBinomialAsPublished => {
                return Err(Error::Unsupported("negative-binomial-as-published has no t(y, mu)".into()))
            }
            Family::CvNormal(c) => {
                let c2 = c * c;
                let u = y / mu;
                [
                    -mu.ln() - (u - 1.0).powi(2) / (2.0 * c2),
                    -1.0 / mu + (u * u - u) / (c2 * mu),
                    1.0 / (mu * mu) + (-3.0 * u * u + 2.0 * u) / (c2 * mu * mu),
                    -2.0 / mu.powi(3) + (12.0 * u * u - 6.0 * u) / (c2 * mu.powi(3)),
                ]
            }
            Family::CvInverseGaussian(c) => {
                let c2 = c * c;
                [
                    0.5 * mu.ln() - (y / mu - 2.0 + mu / y) / (2.0 * c2),
                    0.5 / mu + (y / (mu * mu) - 1.0 / y) / (2.0 * c2),
                    -0.5 / (mu * mu) - y / (c2 * mu.powi(3)),
                    1.0 / mu.powi(3) + 3.0 * y / (c2 * mu.powi(4)),
                ]
            }
            Family::CvLognormal(c) => {
                let s2 = (c * c).ln_1p();
                let w = y.ln() - mu.ln() + 0.5 * s2;
                [
                    -w * w / (2.0 * s2),
                    w / (s2 * mu),
                    -(1.0 + w) / (s2 * mu * mu),
                    (3.0 + 2.0 * w) / (s2 * mu.powi(3)),
                ]
            }
            Family::CvWeibull(c) => {
                let g = ln_gamma(1.0 + 1.0 / c)?.exp();
                let u = (y * g / mu).powf(c);
                [
                    -c * mu.ln() - u,
                    c * (u - 1.0) / mu,
                    (c - c * (c + 1.0) * u) / (mu * mu),
                    (-2.0 * c + c * (c + 1.0) * (c + 2.0) * u) / mu.powi(3),
                ]
            }
        })
    }

    /// `[a, a', a'', a''']` with derivatives in `phi`.
    pub fn a_derivs(&self, phi: f64, y: f64) -> Result<[f64; 4]> {
        self.check_phi(phi)?;
        let half_log = |phi: f64| [0.5 * phi.ln(), 0.5 / phi, -0.5 / (phi * phi), 1.0 / phi.powi(3)];
        Ok(match *self {
            Family::Normal => {
                let h = half_log(phi);
                [h[0] - 0.5 * (2.0 * PI).ln(), h[1], h[2], h[3]]
            }
            Family::Poisson => [-ln_gamma(y + 1.0)?, 0.0, 0.0, 0.0],
            Family::Binomial { trials } => {
                let m = trials as f64;
                let k = (y * m).round();
                [ln_gamma(m + 1.0)? - ln_gamma(k + 1.0)? - ln_gamma(m - k + 1.0)?, 0.0, 0.0, 0.0]
            }
            Family::Gamma | Family::ReciprocalGamma => {
                let d = gamma_a1_derivs(phi)?;
                [phi * phi.ln() - ln_gamma(phi)? - y.ln(), d[0], d[1], d[2]]
            }
            Family::LogGamma => {
                let d = gamma_a1_derivs(phi)?;
                [phi * phi.ln() - ln_gamma(phi)?, d[0], d[1], d[2]]
            }
            Family::InverseGaussian => {
                let h = half_log(phi);
                [h[0] - 0.5 * (2.0 * PI * y.powi(3)).ln(), h[1], h[2], h[3]]
            }
            Family::ReciprocalInverseGaussian => {
                let h = half_log(phi);
                [h[0] - 0.5 * (2.0 * PI * y).ln(), h[1], h[2], h[3]]
            }
            Family::VonMises => {
                let br = bessel_ratio(phi)?;
                [-(2.0 * PI).ln() - ln_bessel_i0(phi)?, -br.r, -br.r1, -br.r2]
            }
            Family::PowerVariance(p) => match tweedie_exact(p) {
                // t = y mu - mu^2/2
                Some(0) => {
                    let h = half_log(phi);
                    [h[0] - 0.5 * (2.0 * PI).ln() - 0.5 * phi * y * y, h[1] - 0.5 * y * y, h[2], h[3]]
                }
                // t = -y/mu - log mu, a = phi log phi - log Gamma(phi) + (phi - 1) log y
                Some(2) => {
                    let d = gamma_a1_derivs(phi)?;
                    let ly = y.ln();
                    [phi * phi.ln() - ln_gamma(phi)? + (phi - 1.0) * ly, d[0] + ly, d[1], d[2]]
                }
                // t = -y/(2 mu^2) + 1/mu
                Some(3) => {
                    let h = half_log(phi);
                    [
                        h[0] - 0.5 * (2.0 * PI * y.powi(3)).ln() - 0.5 * phi / y,
                        h[1] - 0.5 / y,
                        h[2],
                        h[3],
                    ]
                }
                _ => return Err(Error::Unsupported(format!("a(phi, y) for power-variance({p})"))),
            },
            Family::CvNormal(c) => [-c.ln() - 0.5 * (2.0 * PI).ln(), 0.0, 0.0, 0.0],
            Family::CvInverseGaussian(c) => [-c.ln() - 0.5 * (2.0 * PI * y.powi(3)).ln(), 0.0, 0.0, 0.0],
            Family::CvLognormal(c) => {
                let s2 = (c * c).ln_1p();
                [-y.ln() - 0.5 * (2.0 * PI * s2).ln(), 0.0, 0.0, 0.0]
            }
            Family::CvWeibull(c) => {
                let lg = ln_gamma(1.0 + 1.0 / c)?;
                [c.ln() + (c - 1.0) * y.ln() + c * lg, 0.0, 0.0, 0.0]
            }
            Family::Ghs | Family::NegativeBinomialAsPublished | Family::ExponentialVariance(_) => {
                return Err(Error::Unsupported(format!("a(phi, y) for {}", self.name())))
            }
        })
    }

    /// Terms entering the log-likelihood and the score.
    pub fn loglik_terms(&self, y: f64, mu: f64, phi: f64) -> Result<LoglikTerms> {
        self.check_y(y)?;
        let t = self.t_derivs(y, mu)?;
        let a = self.a_derivs(phi, y)?;
        Ok(LoglikTerms {
            t: t[0],
            tprime: t[1],
            a: a[0],
            aprime: a[1],
        })
    }

    fn cv_constants(&self) -> Option<(f64, f64)> {
        match *self {
            Family::CvNormal(c) => {
                let c2 = c * c;
                Some(((1.0 + 2.0 * c2) / c2, (6.0 + 10.0 * c2) / c2))
            }
            // k2 = (2 + c^2)/(2 c^2) is the expected information of this
            // parameterization; k3 = (3 + c^2)/c^2.
            Family::CvInverseGaussian(c) => {
                let c2 = c * c;
                Some(((2.0 + c2) / (2.0 * c2), (3.0 + c2) / c2))
            }
            Family::CvLognormal(c) => {
                let s2 = (c * c).ln_1p();
                Some((1.0 / s2, 3.0 / s2))
            }
            Family::CvWeibull(c) => Some((c * c, c * c * (c + 3.0))),
            _ => None,
        }
    }

    /// `(k2, k3)` for the constant coefficient-of-variation families.
    pub fn cv_k(&self) -> Option<(f64, f64)> {
        self.cv_constants()
    }

    /// `(alpha2, alpha3, alpha2')`; `NaN` when the family has no closed-form `a`.
    fn alpha(&self, phi: f64) -> Result<(f64, f64, f64)> {
        if self.fixed_phi().is_some() {
            return Ok((0.0, 0.0, 0.0));
        }
        match self.a_derivs(phi, 1.0) {
            Ok(a) => Ok((a[2], a[3], a[3])),
            Err(Error::Unsupported(_)) => Ok((f64::NAN, f64::NAN, f64::NAN)),
            Err(e) => Err(e),
        }
    }

    pub fn cumulants(&self, mu: f64, phi: f64) -> Result<CumulantEval> {
        self.check_mu(mu)?;
        self.check_phi(phi)?;
        let (alpha2, alpha3, alpha2p) = self.alpha(phi)?;
        let (d2, d3, d2p) = match *self {
            Family::VonMises => (-bessel_ratio(phi)?.r, 0.0, 0.0),
            Family::ReciprocalGamma => (-1.0 / (mu * mu), 2.0 / mu.powi(3), 2.0 / mu.powi(3)),
            Family::LogGamma => (-1.0, 1.0, 0.0),
            Family::ReciprocalInverseGaussian => (-1.0 / mu, 0.0, 1.0 / (mu * mu)),
            Family::NegativeBinomialAsPublished => (
                1.0 / mu - 1.0 / (1.0 - mu),
                2.0 / (1.0 + mu).powi(2) - 2.0 / (mu * mu),
                -(1.0 / (mu * mu) - 1.0 / (1.0 - mu).powi(2)),
            ),
            Family::CvNormal(_) | Family::CvInverseGaussian(_) | Family::CvLognormal(_) | Family::CvWeibull(_) => {
                let (k2, k3) = self.cv_constants().unwrap();
                (-k2 / (mu * mu), k3 / mu.powi(3), 2.0 * k2 / mu.powi(3))
            }
            _ => {
                let (v, v1, _) = self.variance_function(mu).expect("exponential dispersion family");
                (-1.0 / v, 2.0 * v1 / (v * v), v1 / (v * v))
            }
        };
        Ok(CumulantEval {
            d2,
            d3,
            d2p,
            alpha2,
            alpha3,
            alpha2p,
        })
    }

    /// Draws one response from the family at `(mu, phi)`.
    pub fn sample<R: Rng + ?Sized>(&self, mu: f64, phi: f64, rng: &mut R) -> Result<f64> {
        self.check_mu(mu)?;
        self.check_phi(phi)?;
        let bad = |e: &dyn fmt::Display| domain("family_sample", e.to_string());
        Ok(match *self {
            Family::Normal | Family::PowerVariance(0.0) => {
                Normal::new(mu, 1.0 / phi.sqrt()).map_err(|e| bad(&e))?.sample(rng)
            }
            Family::Poisson => Poisson::new(mu).map_err(|e| bad(&e))?.sample(rng),
            Family::Binomial { trials } => {
                let k = Binomial::new(trials as u64, mu).map_err(|e| bad(&e))?.sample(rng);
                k as f64 / trials as f64
            }
            Family::Gamma | Family::PowerVariance(2.0) => {
                Gamma::new(phi, mu / phi).map_err(|e| bad(&e))?.sample(rng)
            }
            Family::InverseGaussian | Family::PowerVariance(3.0) => {
                InverseGaussian::new(mu, phi).map_err(|e| bad(&e))?.sample(rng)
            }
            Family::VonMises => sample_von_mises(mu, phi, rng),
            Family::ReciprocalGamma => {
                let x: f64 = Gamma::new(phi, 1.0 / (phi * mu)).map_err(|e| bad(&e))?.sample(rng);
                1.0 / x
            }
            Family::LogGamma => {
                let w: f64 = Gamma::new(phi, 1.0 / phi).map_err(|e| bad(&e))?.sample(rng);
                mu + w.ln()
            }
            Family::ReciprocalInverseGaussian => {
                let x: f64 = InverseGaussian::new(1.0 / mu, phi).map_err(|e| bad(&e))?.sample(rng);
                1.0 / x
            }
            Family::CvNormal(c) => Normal::new(mu, c * mu).map_err(|e| bad(&e))?.sample(rng),
            Family::CvInverseGaussian(c) => InverseGaussian::new(mu, mu / (c * c)).map_err(|e| bad(&e))?.sample(rng),
            Family::CvLognormal(c) => {
                let s2 = (c * c).ln_1p();
                LogNormal::new(mu.ln() - 0.5 * s2, s2.sqrt()).map_err(|e| bad(&e))?.sample(rng)
            }
            Family::CvWeibull(c) => {
                let scale = mu / ln_gamma(1.0 + 1.0 / c)?.exp();
                Weibull::new(scale, c).map_err(|e| bad(&e))?.sample(rng)
            }
            _ => return Err(Error::Unsupported(format!("sampling from {}", self.name()))),
        })
    }
}

/// Best-Fisher rejection sampler, result wrapped into `(-pi, pi]`.
fn sample_von_mises<R: Rng + ?Sized>(mu: f64, kappa: f64, rng: &mut R) -> f64 {
    let angle = if kappa < 1e-8 {
        let u: f64 = rng.sample(Open01);
        PI * (2.0 * u - 1.0)
    } else {
        let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
        let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
        let r = (1.0 + rho * rho) / (2.0 * rho);
        loop {
            let u1: f64 = rng.sample(Open01);
            let u2: f64 = rng.sample(Open01);
            let u3: f64 = rng.sample(Open01);
            let z = (PI * u1).cos();
            let f = (1.0 + r * z) / (r + z);
            let c = kappa * (r - f);
            if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
                let dev = f.clamp(-1.0, 1.0).acos();
                break mu + if u3 > 0.5 { dev } else { -dev };
            }
        }
    };
    wrap_angle(angle)
}

/// Maps an angle into `(-pi, pi]`.
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = x - two_pi * ((x + PI) / two_pi).floor();
    if w <= -PI {
        w += two_pi;
    }
    w
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn parse_param(name: &str, arg: Option<&str>) -> Result<f64> {
    let arg = arg.ok_or_else(|| Error::InvalidConfig(format!("family '{name}' needs a parameter, e.g. {name}(1.5)")))?;
    arg.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::InvalidConfig(format!("bad parameter '{arg}' for family '{name}'")))
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.find('(') {
            Some(open) => {
                let close = s
                    .rfind(')')
                    .filter(|&c| c > open && c == s.len() - 1)
                    .ok_or_else(|| Error::InvalidConfig(format!("malformed family '{s}'")))?;
                (s[..open].trim(), Some(&s[open + 1..close]))
            }
            None => (s, None),
        };
        let positive = |v: f64| {
            if v > 0.0 {
                Ok(v)
            } else {
                Err(Error::InvalidConfig(format!("family '{name}' parameter must be positive")))
            }
        };
        let no_arg = |f: Family| {
            if arg.is_some() {
                Err(Error::InvalidConfig(format!("family '{name}' takes no parameter")))
            } else {
                Ok(f)
            }
        };
        match name {
            "normal" => no_arg(Family::Normal),
            "poisson" => no_arg(Family::Poisson),
            "binomial" => match arg {
                None => Ok(Family::Binomial { trials: 1 }),
                Some(a) => a
                    .trim()
                    .parse::<u32>()
                    .ok()
                    .filter(|&m| m > 0)
                    .map(|trials| Family::Binomial { trials })
                    .ok_or_else(|| Error::InvalidConfig(format!("bad trial count '{a}'"))),
            },
            "gamma" => no_arg(Family::Gamma),
            "inverse-gaussian" => no_arg(Family::InverseGaussian),
            "von-mises" => no_arg(Family::VonMises),
            "reciprocal-gamma" => no_arg(Family::ReciprocalGamma),
            "log-gamma" => no_arg(Family::LogGamma),
            "reciprocal-inverse-gaussian" => no_arg(Family::ReciprocalInverseGaussian),
            "ghs" => no_arg(Family::Ghs),
            "negative-binomial-as-published" => no_arg(Family::NegativeBinomialAsPublished),
            "power-variance" => Ok(Family::PowerVariance(parse_param(name, arg)?)),
            "exponential-variance" => Ok(Family::ExponentialVariance(parse_param(name, arg)?)),
            "cv-normal" => Ok(Family::CvNormal(positive(parse_param(name, arg)?)?)),
            "cv-inverse-gaussian" => Ok(Family::CvInverseGaussian(positive(parse_param(name, arg)?)?)),
            "cv-lognormal" => Ok(Family::CvLognormal(positive(parse_param(name, arg)?)?)),
            "cv-weibull" => Ok(Family::CvWeibull(positive(parse_param(name, arg)?)?)),
            other => Err(Error::InvalidConfig(format!("unknown family '{other}'"))),
        }
    }
}
