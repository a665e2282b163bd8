//! Link functions `g(mu) = eta` with the inverse and its first two
//! derivatives `dmu/deta`, `d2mu/deta2`, expressed as functions of `mu`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::specialfns::{normal_cdf, normal_pdf, normal_quantile};

/// Inverse link value with derivatives at a given `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkEval {
    pub mu: f64,
    pub dmu: f64,
    pub d2mu: f64,
}

/// A user-supplied link. Implementors must be strictly monotone and C2.
pub trait CustomLink: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn apply(&self, mu: f64) -> Result<f64>;
    fn eval(&self, eta: f64) -> Result<LinkEval>;
}

#[derive(Debug, Clone)]
pub enum Link {
    Logit,
    Probit,
    Log,
    Identity,
    Reciprocal,
    /// `mu^-2 = eta`
    SquareReciprocal,
    /// `sqrt(mu) = eta`
    Sqrt,
    Cloglog,
    /// `tan(mu) = eta` on the principal branch `(-pi/2, pi/2)`.
    Tangent,
    Custom(Arc<dyn CustomLink>),
}

impl PartialEq for Link {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Link::Custom(a), Link::Custom(b)) => Arc::ptr_eq(a, b),
            _ => std::mem::discriminant(self) == std::mem::discriminant(other),
        }
    }
}

impl Link {
    pub const BUILTIN: [Link; 9] = [
        Link::Logit,
        Link::Probit,
        Link::Log,
        Link::Identity,
        Link::Reciprocal,
        Link::SquareReciprocal,
        Link::Sqrt,
        Link::Cloglog,
        Link::Tangent,
    ];

    pub fn name(&self) -> &str {
        match self {
            Link::Logit => "logit",
            Link::Probit => "probit",
            Link::Log => "log",
            Link::Identity => "identity",
            Link::Reciprocal => "reciprocal",
            Link::SquareReciprocal => "sqrt-reciprocal",
            Link::Sqrt => "sqrt",
            Link::Cloglog => "cloglog",
            Link::Tangent => "tangent",
            Link::Custom(c) => c.name(),
        }
    }

    /// Open interval of valid `mu`.
    pub fn mu_domain(&self) -> (f64, f64) {
        match self {
            Link::Logit | Link::Probit | Link::Cloglog => (0.0, 1.0),
            Link::Log | Link::Reciprocal | Link::SquareReciprocal | Link::Sqrt => (0.0, f64::INFINITY),
            Link::Identity | Link::Custom(_) => (f64::NEG_INFINITY, f64::INFINITY),
            Link::Tangent => (-FRAC_PI_2, FRAC_PI_2),
        }
    }

    pub fn in_domain(&self, mu: f64) -> bool {
        let (lo, hi) = self.mu_domain();
        mu.is_finite() && mu > lo && mu < hi
    }

    /// `eta = g(mu)`.
    pub fn apply(&self, mu: f64) -> Result<f64> {
        if let Link::Custom(c) = self {
            return c.apply(mu);
        }
        if !self.in_domain(mu) {
            return Err(domain("link_apply", format!("mu = {mu} outside the {} link domain", self.name())));
        }
        Ok(match self {
            Link::Logit => (mu / (1.0 - mu)).ln(),
            Link::Probit => normal_quantile(mu)?,
            Link::Log => mu.ln(),
            Link::Identity => mu,
            Link::Reciprocal => 1.0 / mu,
            Link::SquareReciprocal => 1.0 / (mu * mu),
            Link::Sqrt => mu.sqrt(),
            Link::Cloglog => (-(-mu).ln_1p()).ln(),
            Link::Tangent => mu.tan(),
            Link::Custom(_) => unreachable!(),
        })
    }

    /// `mu = g^{-1}(eta)` with `dmu/deta` and `d2mu/deta2`.
    pub fn eval(&self, eta: f64) -> Result<LinkEval> {
        if !eta.is_finite() {
            return Err(domain("link_eval", format!("non-finite eta for {} link", self.name())));
        }
        let out = match self {
            Link::Logit => {
                let mu = if eta >= 0.0 {
                    1.0 / (1.0 + (-eta).exp())
                } else {
                    let e = eta.exp();
                    e / (1.0 + e)
                };
                let v = mu * (1.0 - mu);
                LinkEval { mu, dmu: v, d2mu: v * (1.0 - 2.0 * mu) }
            }
            Link::Probit => {
                let f = normal_pdf(eta);
                LinkEval { mu: normal_cdf(eta), dmu: f, d2mu: -eta * f }
            }
            Link::Log => {
                let mu = eta.exp();
                LinkEval { mu, dmu: mu, d2mu: mu }
            }
            Link::Identity => LinkEval { mu: eta, dmu: 1.0, d2mu: 0.0 },
            Link::Reciprocal => {
                if eta <= 0.0 {
                    return Err(domain("link_eval", format!("reciprocal link needs eta > 0, got {eta}")));
                }
                let mu = 1.0 / eta;
                LinkEval { mu, dmu: -mu * mu, d2mu: 2.0 * mu * mu * mu }
            }
            Link::SquareReciprocal => {
                if eta <= 0.0 {
                    return Err(domain("link_eval", format!("sqrt-reciprocal link needs eta > 0, got {eta}")));
                }
                let mu = 1.0 / eta.sqrt();
                let mu3 = mu * mu * mu;
                LinkEval { mu, dmu: -0.5 * mu3, d2mu: 0.75 * mu3 * mu * mu }
            }
            Link::Sqrt => {
                if eta <= 0.0 {
                    return Err(domain("link_eval", format!("sqrt link needs eta > 0, got {eta}")));
                }
                LinkEval { mu: eta * eta, dmu: 2.0 * eta, d2mu: 2.0 }
            }
            Link::Cloglog => {
                let e = eta.exp();
                // 1 - mu = exp(-e^eta); log(1 - mu) = -e^eta
                let one_minus = (-e).exp();
                let mu = -(-e).exp_m1();
                let dmu = e * one_minus;
                LinkEval { mu, dmu, d2mu: dmu * (1.0 - e) }
            }
            Link::Tangent => {
                let mu = eta.atan();
                let c = mu.cos();
                // d/deta cos^2(mu) = -2 cos^3(mu) sin(mu)
                LinkEval { mu, dmu: c * c, d2mu: -2.0 * c * c * c * mu.sin() }
            }
            Link::Custom(c) => c.eval(eta)?,
        };
        if !out.mu.is_finite() || !out.dmu.is_finite() || !out.d2mu.is_finite() {
            return Err(domain("link_eval", format!("{} link overflow at eta = {eta}", self.name())));
        }
        Ok(out)
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Link {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "logit" => Link::Logit,
            "probit" => Link::Probit,
            "log" => Link::Log,
            "identity" => Link::Identity,
            "reciprocal" | "inverse" => Link::Reciprocal,
            "sqrt-reciprocal" | "square-reciprocal" => Link::SquareReciprocal,
            "sqrt" => Link::Sqrt,
            "cloglog" => Link::Cloglog,
            "tangent" | "tan" => Link::Tangent,
            other => return Err(Error::InvalidConfig(format!("unknown link '{other}'"))),
        })
    }
}
