//! Log-densities of the families used by the model. Normal variances, not
//! standard deviations; Gamma is shape-rate, inverse-Gamma shape-scale.

use std::f64::consts::FRAC_1_SQRT_2;

use statrs::function::erf::erfc;
use statrs::function::gamma::{digamma, ln_gamma};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn normal_lpdf(x: f64, mean: f64, var: f64) -> f64 {
    if !(var > 0.0) {
        return f64::NEG_INFINITY;
    }
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// Upper tail `1 - Φ(z)`, accurate for large positive z.
fn upper_tail(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// `ln(Φ(b) - Φ(a))` for standardized bounds, avoiding cancellation in
/// either tail.
pub fn ln_normal_mass(a: f64, b: f64) -> f64 {
    if a >= b {
        return f64::NEG_INFINITY;
    }
    let mass = if a >= 0.0 {
        upper_tail(a) - upper_tail(b)
    } else if b <= 0.0 {
        upper_tail(-b) - upper_tail(-a)
    } else {
        1.0 - upper_tail(-a) - upper_tail(b)
    };
    mass.ln()
}

/// Normal truncated to `[lo, hi]`, normalizer included. `None` bounds are infinite.
pub fn truncated_normal_lpdf(x: f64, mean: f64, var: f64, lo: Option<f64>, hi: Option<f64>) -> f64 {
    if lo.is_some_and(|l| x < l) || hi.is_some_and(|h| x > h) || !(var > 0.0) {
        return f64::NEG_INFINITY;
    }
    let sd = var.sqrt();
    let a = lo.map_or(f64::NEG_INFINITY, |l| (l - mean) / sd);
    let b = hi.map_or(f64::INFINITY, |h| (h - mean) / sd);
    normal_lpdf(x, mean, var) - ln_normal_mass(a, b)
}

pub fn gamma_lpdf(x: f64, shape: f64, rate: f64) -> f64 {
    if !(x > 0.0 && shape > 0.0 && rate > 0.0) {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

pub fn inv_gamma_lpdf(x: f64, shape: f64, scale: f64) -> f64 {
    if !(x > 0.0 && shape > 0.0 && scale > 0.0) {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// Density of `x` when `ln x ~ N(mu, var)`.
pub fn lognormal_lpdf(x: f64, mu: f64, var: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    normal_lpdf(x.ln(), mu, var) - x.ln()
}

/// Family of a Level-4 prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// shape, rate
    Gamma,
    /// mean, variance
    Normal,
    /// shape, scale
    InvGamma,
}

impl Family {
    pub fn lpdf(self, x: f64, alpha: f64, beta: f64) -> f64 {
        match self {
            Family::Gamma => gamma_lpdf(x, alpha, beta),
            Family::Normal => normal_lpdf(x, alpha, beta),
            Family::InvGamma => inv_gamma_lpdf(x, alpha, beta),
        }
    }

    pub fn mean(self, alpha: f64, beta: f64) -> f64 {
        match self {
            Family::Gamma => alpha / beta,
            Family::Normal => alpha,
            Family::InvGamma => beta / (alpha - 1.0),
        }
    }

    pub fn positive(self) -> bool {
        !matches!(self, Family::Normal)
    }

    /// `(∂/∂α, ∂/∂β)` of `lpdf(x; α, β)`.
    pub fn score(self, x: f64, alpha: f64, beta: f64) -> (f64, f64) {
        match self {
            Family::Gamma => (beta.ln() - digamma(alpha) + x.ln(), alpha / beta - x),
            Family::Normal => {
                let d = x - alpha;
                (d / beta, -0.5 / beta + 0.5 * d * d / (beta * beta))
            }
            Family::InvGamma => (beta.ln() - digamma(alpha) - x.ln(), alpha / beta - 1.0 / x),
        }
    }
}
