//! Stream-visibility primitives.
//!
//! A user's stream accumulates messages between visits; how many arrive is
//! geometric in the user's load ratio `rho` (new messages per visit), and how
//! many items the user views per visit follows an inverse-Gaussian "law of
//! surfing" with mean `mu` and shape `lambda`. The probability that a fresh
//! item is seen at all — the user's *visibility* — is the expectation of the
//! inverse-Gaussian upper tail under the geometric position of the item:
//!
//! `v(rho) = sum_{L=0}^{L_max} G(rho, L) * S(L)`
//!
//! where `G` is the geometric pmf and `S` the inverse-Gaussian upper CDF.
//! The sum is truncated at `L_max`; constructors and a tail-mass guard keep
//! every term well defined.

use libm::erfc;
use thiserror::Error;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Default truncation depth of the visibility sum.
pub const DEFAULT_L_MAX: u64 = 100_000;

/// Default ceiling on the geometric tail mass dropped by truncation.
pub const DEFAULT_TAIL_TOL: f64 = 1e-3;

/// Contributions bounded below this are dropped; the bound is conservative
/// (remaining geometric mass times the current, non-increasing upper CDF),
/// so the summation error stays far under the tail-mass guard.
const SUM_CUTOFF: f64 = 1e-18;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "geometric tail mass {tail:.3e} beyond l_max={l_max} exceeds tolerance {tol:.3e}; \
         raise l_max or loosen the tolerance"
    )]
    Truncation { tail: f64, l_max: u64, tol: f64 },
}

/// Parameters of the inverse-Gaussian law of surfing: the distribution of
/// how many stream items a user views in one visit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfingParams {
    mu: f64,
    lambda: f64,
}

impl SurfingParams {
    pub const DEFAULT_MU: f64 = 14.0;
    pub const DEFAULT_LAMBDA: f64 = 14.0;

    pub fn new(mu: f64, lambda: f64) -> Result<Self, DistError> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(DistError::InvalidParameter(format!(
                "surfing mu must be finite and > 0, got {mu}"
            )));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(DistError::InvalidParameter(format!(
                "surfing lambda must be finite and > 0, got {lambda}"
            )));
        }
        Ok(Self { mu, lambda })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Variance of the viewing depth, `mu^3 / lambda`.
    pub fn variance(&self) -> f64 {
        self.mu.powi(3) / self.lambda
    }
}

impl Default for SurfingParams {
    fn default() -> Self {
        Self {
            mu: Self::DEFAULT_MU,
            lambda: Self::DEFAULT_LAMBDA,
        }
    }
}

/// A user's information load: expected new stream messages per visit.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LoadRatio(f64);

impl LoadRatio {
    pub fn new(rho: f64) -> Result<Self, DistError> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(DistError::InvalidParameter(format!(
                "load ratio must be finite and >= 0, got {rho}"
            )));
        }
        Ok(Self(rho))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Probability that exactly `l` messages arrived since the last visit:
/// `(rho/(1+rho))^l * (1/(1+rho))`.
pub fn geometric_pmf(rho: LoadRatio, l: u64) -> f64 {
    let r = rho.value();
    let p = 1.0 / (1.0 + r);
    let q = r / (1.0 + r);
    // 0^0 = 1 covers rho = 0, l = 0.
    q.powf(l as f64) * p
}

/// Inverse-Gaussian density of viewing depth `l > 0`.
pub fn ig_density(params: &SurfingParams, l: f64) -> Result<f64, DistError> {
    if !(l.is_finite() && l > 0.0) {
        return Err(DistError::InvalidParameter(format!(
            "inverse-Gaussian density needs l > 0, got {l}"
        )));
    }
    let mu = params.mu();
    let lam = params.lambda();
    let norm = (lam / (2.0 * std::f64::consts::PI * l.powi(3))).sqrt();
    let expo = -lam * (l - mu) * (l - mu) / (2.0 * mu * mu * l);
    Ok(norm * expo.exp())
}

/// Upper CDF of the inverse-Gaussian law: the probability a visit reaches
/// depth `l` or deeper. `S(0) = 1`.
///
/// The textbook closed form contains `exp(2 lambda / mu) * Phi(-b)`, which
/// overflows long before the product does. We fold the exponential into the
/// scaled complement `erfcx(b / sqrt 2)` using the identity
/// `2 lambda / mu - b^2 / 2 = -lambda (l - mu)^2 / (2 mu^2 l)`, so both
/// terms share one well-conditioned exponent.
pub fn ig_upper_cdf(params: &SurfingParams, l: f64) -> Result<f64, DistError> {
    if !l.is_finite() || l < 0.0 {
        return Err(DistError::InvalidParameter(format!(
            "inverse-Gaussian upper CDF needs l >= 0, got {l}"
        )));
    }
    if l == 0.0 {
        return Ok(1.0);
    }
    let mu = params.mu();
    let lam = params.lambda();
    let s = (lam / l).sqrt();
    let a = s * (l / mu - 1.0);
    let b = s * (l / mu + 1.0);
    let phi_neg_a = 0.5 * erfc(a * FRAC_1_SQRT_2);
    let shared_expo = (-lam * (l - mu) * (l - mu) / (2.0 * mu * mu * l)).exp();
    let upper = phi_neg_a - 0.5 * shared_expo * erfcx(b * FRAC_1_SQRT_2);
    Ok(upper.clamp(0.0, 1.0))
}

/// Scaled complementary error function `exp(x^2) * erfc(x)` for `x >= 0`.
fn erfcx(x: f64) -> f64 {
    if x < 25.0 {
        (x * x).exp() * erfc(x)
    } else {
        // Asymptotic series; truncation error is below 1e-11 at x = 25 and
        // falls rapidly beyond.
        let inv2 = 1.0 / (2.0 * x * x);
        let series = 1.0 + inv2 * (-1.0 + inv2 * (3.0 - inv2 * 15.0));
        series / (x * std::f64::consts::PI.sqrt())
    }
}

/// Visibility with the default truncation-tolerance guard.
pub fn visibility(rho: LoadRatio, params: &SurfingParams, l_max: u64) -> Result<f64, DistError> {
    visibility_with_tolerance(rho, params, l_max, DEFAULT_TAIL_TOL)
}

/// Probability that a fresh stream item is viewed by a user with load
/// `rho`: the geometric mixture of inverse-Gaussian upper tails, truncated
/// at `l_max`.
///
/// Errors if the geometric mass beyond `l_max` (which the truncation drops)
/// exceeds `tail_tol`.
pub fn visibility_with_tolerance(
    rho: LoadRatio,
    params: &SurfingParams,
    l_max: u64,
    tail_tol: f64,
) -> Result<f64, DistError> {
    if l_max == 0 {
        return Err(DistError::InvalidParameter(
            "l_max must be at least 1".into(),
        ));
    }
    if !(tail_tol.is_finite() && tail_tol > 0.0) {
        return Err(DistError::InvalidParameter(format!(
            "tail tolerance must be finite and > 0, got {tail_tol}"
        )));
    }
    let r = rho.value();
    let p = 1.0 / (1.0 + r);
    let q = r / (1.0 + r);
    let tail = q.powf((l_max + 1) as f64);
    if tail > tail_tol {
        return Err(DistError::Truncation {
            tail,
            l_max,
            tol: tail_tol,
        });
    }
    let mut acc = 0.0;
    let mut geom = p; // G(rho, l)
    let mut remaining = q; // geometric mass beyond l
    for l in 0..=l_max {
        let s = ig_upper_cdf(params, l as f64)?;
        acc += geom * s;
        // S is non-increasing, so everything still to come is bounded by
        // remaining * s.
        if remaining * s < SUM_CUTOFF {
            break;
        }
        geom *= q;
        remaining *= q;
    }
    Ok(acc.min(1.0))
}

// ==== tests ================================================================
