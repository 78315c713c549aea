//! Chance-constrained travel buffers and Gaussian delay sampling.
//!
//! A leg whose delay is `Normal(mu, sigma)` gets a buffer `t_s` such that the
//! delay stays below `t_s` with probability `epsilon`. [`BufferMode::Corrected`]
//! uses `mu + sigma * z`; [`BufferMode::PaperLiteral`] keeps the historical
//! `mu + sigma^2 * z` form. `z` is the standard normal quantile of `epsilon`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum StochasticError {
    #[error("probability {0} outside the open interval (0, 1)")]
    Domain(f64),
    #[error("invalid delay parameters mu={mu}, sigma={sigma}")]
    InvalidParams { mu: f64, sigma: f64 },
}

/// Mean and standard deviation of the extra travel time on one leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayParams {
    pub mu: f64,
    pub sigma: f64,
}

impl DelayParams {
    pub fn new(mu: f64, sigma: f64) -> Result<Self, StochasticError> {
        if mu.is_finite() && sigma.is_finite() && mu >= 0.0 && sigma >= 0.0 {
            Ok(Self { mu, sigma })
        } else {
            Err(StochasticError::InvalidParams { mu, sigma })
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BufferMode {
    /// `mu + sigma * z`.
    #[default]
    Corrected,
    /// `mu + sigma^2 * z`.
    #[serde(rename = "paper")]
    PaperLiteral,
}

impl BufferMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BufferMode::Corrected => "corrected",
            BufferMode::PaperLiteral => "paper",
        }
    }
}

impl std::fmt::Display for BufferMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BufferMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "corrected" => Ok(BufferMode::Corrected),
            "paper" | "paper-literal" => Ok(BufferMode::PaperLiteral),
            other => Err(format!("unknown buffer mode `{other}` (expected corrected|paper)")),
        }
    }
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

// Acklam's rational approximation, relative error about 1.15e-9 before refinement.
const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.38357751867269e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];
const P_LOW: f64 = 0.02425;

fn acklam(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Inverse of the standard normal CDF.
///
/// Rational approximation followed by one Halley step against the
/// erfc-based CDF, giving `|normal_cdf(z) - p|` well below `1e-9`.
pub fn normal_quantile(p: f64) -> Result<f64, StochasticError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(StochasticError::Domain(p));
    }
    let x = acklam(p);
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    Ok(x - u / (1.0 + 0.5 * x * u))
}

/// Buffer time for one leg.
pub fn buffer(params: DelayParams, epsilon: f64, mode: BufferMode) -> Result<f64, StochasticError> {
    Ok(BufferPolicy::new(epsilon, mode)?.buffer(params))
}

/// Buffer rule with the quantile of `epsilon` computed once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferPolicy {
    z: f64,
    mode: BufferMode,
}

impl BufferPolicy {
    pub fn new(epsilon: f64, mode: BufferMode) -> Result<Self, StochasticError> {
        Ok(Self {
            z: normal_quantile(epsilon)?,
            mode,
        })
    }

    pub fn mode(&self) -> BufferMode {
        self.mode
    }

    pub fn quantile(&self) -> f64 {
        self.z
    }

    #[inline]
    pub fn buffer(&self, params: DelayParams) -> f64 {
        match self.mode {
            BufferMode::Corrected => params.mu + params.sigma * self.z,
            BufferMode::PaperLiteral => params.mu + params.sigma * params.sigma * self.z,
        }
    }
}

/// One draw of the additive delay `Normal(mu, sigma)`. Negative draws are kept.
pub fn sample_delay<R: Rng + ?Sized>(params: DelayParams, rng: &mut R) -> f64 {
    if params.sigma == 0.0 {
        return params.mu;
    }
    // DelayParams guarantees a finite, nonnegative sigma
    Normal::new(params.mu, params.sigma)
        .expect("finite sigma")
        .sample(rng)
}
