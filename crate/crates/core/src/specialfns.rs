//! Special functions used by the family catalog: log-gamma, polygamma of
//! orders 0..=2, modified Bessel functions `I0`, `I1` and the ratio
//! `r(phi) = I1(phi) / I0(phi)` with its first two derivatives, plus the
//! standard normal density, distribution function and quantile.
//!
//! Everything here is a pure function of its arguments.

use crate::error::{domain, Result};
use serde::{Deserialize, Serialize};

/// Even Bernoulli numbers B2, B4, ..., B16.
const BERNOULLI_EVEN: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Arguments below this are pushed upward by recurrence before the
/// asymptotic expansion is used.
const ASYMPTOTIC_THRESHOLD: f64 = 10.0;

/// Switch-over point between the Bessel power series and the scaled
/// asymptotic expansion.
const BESSEL_SERIES_LIMIT: f64 = 15.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("ln_gamma", format!("argument must be positive, got {x}")));
    }
    let mut shift = 0.0;
    let mut z = x;
    while z < ASYMPTOTIC_THRESHOLD {
        shift += z.ln();
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv;
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        let two_k = 2.0 * (k as f64 + 1.0);
        series += b / (two_k * (two_k - 1.0)) * pow;
        pow *= inv2;
    }
    Ok((z - 0.5) * z.ln() - z + LN_SQRT_2PI + series - shift)
}

/// Polygamma function `psi^(m)(x)` for `m` in `0..=2` and `x > 0`.
///
/// The argument is raised to at least 10 with the recurrence
/// `psi^(m)(x) = psi^(m)(x + 1) - (-1)^m m! / x^(m+1)` and the asymptotic
/// expansion in Bernoulli numbers is summed there.
pub fn polygamma(m: u32, x: f64) -> Result<f64> {
    if m > 2 {
        return Err(domain("polygamma", format!("order {m} not supported (0..=2)")));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain("polygamma", format!("argument must be positive, got {x}")));
    }
    let mut acc = 0.0;
    let mut z = x;
    while z < ASYMPTOTIC_THRESHOLD {
        acc += match m {
            0 => -1.0 / z,
            1 => 1.0 / (z * z),
            _ => -2.0 / (z * z * z),
        };
        z += 1.0;
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let tail = match m {
        0 => {
            let mut s = z.ln() - 0.5 * inv;
            let mut pow = inv2;
            for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
                s -= b / (2.0 * (k as f64 + 1.0)) * pow;
                pow *= inv2;
            }
            s
        }
        1 => {
            let mut s = inv + 0.5 * inv2;
            let mut pow = inv2 * inv;
            for b in BERNOULLI_EVEN.iter() {
                s += b * pow;
                pow *= inv2;
            }
            s
        }
        _ => {
            let mut s = -inv2 - inv2 * inv;
            let mut pow = inv2 * inv2;
            for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
                s -= (2.0 * (k as f64 + 1.0) + 1.0) * b * pow;
                pow *= inv2;
            }
            s
        }
    };
    Ok(acc + tail)
}

pub fn digamma(x: f64) -> Result<f64> {
    polygamma(0, x)
}

pub fn trigamma(x: f64) -> Result<f64> {
    polygamma(1, x)
}

/// Power series `sum_k (x^2/4)^k / (k! (k+nu)!)` for `nu` in {0, 1}, times `(x/2)^nu`.
fn bessel_series(nu: u32, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = if nu == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + nu as f64));
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum
}

/// Scaled asymptotic sums for large `x`:
/// returns `(s0, s1, s0 - s1)` where `I_nu(x) = e^x / sqrt(2 pi x) * s_nu`.
/// The difference is summed termwise so `1 - r` keeps full relative accuracy.
fn bessel_asymptotic(x: f64) -> (f64, f64, f64) {
    let mut s0 = 1.0;
    let mut s1 = 1.0;
    let mut diff = 0.0;
    let mut t0: f64 = 1.0;
    let mut t1: f64 = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        let denom = k as f64 * 8.0 * x;
        t0 *= -(0.0 - odd * odd) / denom;
        t1 *= -(4.0 - odd * odd) / denom;
        let size = t0.abs().max(t1.abs());
        if size > prev {
            break;
        }
        s0 += t0;
        s1 += t1;
        diff += t0 - t1;
        prev = size;
        if size < 1e-17 {
            break;
        }
    }
    (s0, s1, diff)
}

fn check_bessel_arg(context: &'static str, x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(domain(context, format!("argument must be finite and nonnegative, got {x}")));
    }
    Ok(())
}

/// Exponentially scaled `e^{-x} I0(x)` for `x >= 0`.
pub fn bessel_i0e(x: f64) -> Result<f64> {
    check_bessel_arg("bessel_i0e", x)?;
    if x < BESSEL_SERIES_LIMIT {
        Ok(bessel_series(0, x) * (-x).exp())
    } else {
        let (s0, _, _) = bessel_asymptotic(x);
        Ok(s0 / (2.0 * std::f64::consts::PI * x).sqrt())
    }
}

/// Exponentially scaled `e^{-x} I1(x)` for `x >= 0`.
pub fn bessel_i1e(x: f64) -> Result<f64> {
    check_bessel_arg("bessel_i1e", x)?;
    if x < BESSEL_SERIES_LIMIT {
        Ok(bessel_series(1, x) * (-x).exp())
    } else {
        let (_, s1, _) = bessel_asymptotic(x);
        Ok(s1 / (2.0 * std::f64::consts::PI * x).sqrt())
    }
}

pub fn bessel_i0(x: f64) -> Result<f64> {
    Ok(bessel_i0e(x)? * x.exp())
}

pub fn bessel_i1(x: f64) -> Result<f64> {
    Ok(bessel_i1e(x)? * x.exp())
}

/// `log I0(x)`, finite for every finite `x >= 0`.
pub fn ln_bessel_i0(x: f64) -> Result<f64> {
    Ok(x + bessel_i0e(x)?.ln())
}

/// `r(phi)` together with `r'(phi)` and `r''(phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselRatioEval {
    pub r: f64,
    pub r1: f64,
    pub r2: f64,
}

/// Evaluates `r(phi) = I1(phi)/I0(phi)` and its derivatives from the
/// recurrences `I0' = I1`, `I1' = I0 - I1/phi`:
/// `r' = 1 - r/phi - r^2`, `r'' = -r'/phi + r/phi^2 - 2 r r'`.
pub fn bessel_ratio(phi: f64) -> Result<BesselRatioEval> {
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(domain("bessel_ratio", format!("phi must be positive, got {phi}")));
    }
    // s = 1 - r, kept separately for accuracy at large phi.
    let (r, s) = if phi < BESSEL_SERIES_LIMIT {
        let r = bessel_series(1, phi) / bessel_series(0, phi);
        (r, 1.0 - r)
    } else {
        let (s0, s1, diff) = bessel_asymptotic(phi);
        (s1 / s0, diff / s0)
    };
    let r1 = if phi < BESSEL_SERIES_LIMIT {
        1.0 - r / phi - r * r
    } else {
        2.0 * s - s * s - r / phi
    };
    let r2 = -r1 / phi + r / (phi * phi) - 2.0 * r * r1;
    Ok(BesselRatioEval { r, r1, r2 })
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile, refined by one Halley step against [`normal_cdf`].
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain("normal_quantile", format!("probability must be in (0, 1), got {p}")));
    }
    let x = -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    let density = normal_pdf(x);
    if density <= 0.0 {
        return Ok(x);
    }
    let u = (normal_cdf(x) - p) / density;
    Ok(x - u / (1.0 + 0.5 * x * u))
}
