//! Drift function, error exponents and the closed-form bounds.
//!
//! Natural logarithms throughout; `H(1/2) = ln 2`.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::rule::{PollingRule, RuleDistribution};

/// Tolerance of the exponent quadrature.
pub const EXPONENT_TOLERANCE: f64 = 1e-8;

/// `x ln y` with `0 ln 0 = 0`.
fn xlny(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Binary entropy in nats.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0,1]")));
    }
    Ok(-xlny(p, p) - xlny(1.0 - p, 1.0 - p))
}

/// `D(p; 1/2) = ln 2 - H(p)`: relative entropy of Bernoulli(p) to a fair coin.
pub fn kl_bernoulli_half(p: f64) -> Result<f64> {
    Ok(LN_2 - binary_entropy(p)?)
}

/// `x P(Z_x <= m-d) / (x(1-x))` and `(1-x) P(Z_x >= d) / (x(1-x))` for one rule.
///
/// With the common factor cancelled both are polynomials, so they stay
/// meaningful at `x = 0` and `x = 1`.
fn reduced_parts(rule: PollingRule, x: f64) -> (f64, f64) {
    let (m, d) = (rule.m(), rule.d());
    let y = 1.0 - x;
    // C(m, d)
    let mut coef = (1..=d).fold(1.0f64, |c, k| c * f64::from(m - k + 1) / f64::from(k));
    let mut down = 0.0;
    let mut up = 0.0;
    for k in d..=m {
        if k > d {
            coef = coef * f64::from(m - k + 1) / f64::from(k);
        }
        down += coef * y.powi(k as i32 - 1) * x.powi((m - k) as i32);
        up += coef * x.powi(k as i32 - 1) * y.powi((m - k) as i32);
    }
    (down, up)
}

/// The drift ratio `g(x) = x E[P(Z_{M,x} <= M-D)] / ((1-x) E[P(Z_{M,x} >= D)])`:
/// probability of a down step over probability of an up step at fraction `x`
/// of ones. Returns `+inf` where only down steps are possible.
pub fn drift_ratio(x: f64, rules: &RuleDistribution) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("fraction {x} outside [0,1]")));
    }
    let mut down = 0.0;
    let mut up = 0.0;
    for &(rule, w) in rules.entries() {
        let (dn, u) = reduced_parts(rule, x);
        down += w * dn;
        up += w * u;
    }
    assert!(
        down > 0.0 || up > 0.0,
        "both step probabilities vanish at x={x}"
    );
    if up == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(down / up)
}

/// `int_alpha^{1/2} ln g(x) dx`, the exponent bound on the wrong-consensus probability.
pub fn exponent_integral(alpha: f64, rules: &RuleDistribution) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::Domain(format!("alpha {alpha} outside (0, 1/2]")));
    }
    if !rules.is_strict_majority_as() {
        return Err(Error::Domain(format!(
            "rules {rules} include a rule without a strict majority (2d > m)"
        )));
    }
    if alpha == 0.5 {
        return Ok(0.0);
    }
    let q = integrate(
        |x| drift_ratio(x, rules).map(f64::ln).unwrap_or(f64::NAN),
        alpha,
        0.5,
        EXPONENT_TOLERANCE,
    )?;
    Ok(q.value)
}

/// `ln` of the `(m, m)` bound `c exp(-(N-1)(m-1) D(alpha; 1/2))`.
pub fn log_mm_error_bound(n: usize, m: u32, alpha: f64, c: f64) -> Result<f64> {
    if m < 2 {
        return Err(Error::Domain(format!("bound needs m >= 2, got {m}")));
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Domain(format!("alpha {alpha} outside (0, 1/2)")));
    }
    if !(c > 0.0) {
        return Err(Error::Domain(format!("constant {c} must be positive")));
    }
    let steps = n.saturating_sub(1) as f64;
    Ok(c.ln() - steps * f64::from(m - 1) * kl_bernoulli_half(alpha)?)
}

/// `c exp(-(N-1)(m-1) D(alpha; 1/2))`.
pub fn mm_error_bound(n: usize, m: u32, alpha: f64, c: f64) -> Result<f64> {
    log_mm_error_bound(n, m, alpha, c).map(f64::exp)
}

/// Antiderivative of `ln g` for the `(1,1)`/`(2,2)` mixture that picks the
/// voter rule with probability `p`:
/// `I(x) = (x - 1/(1-p)) ln(1-(1-p)x) - (x + p/(1-p)) ln(p+(1-p)x)`.
pub fn mixture_rate(x: f64, p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Domain(format!("mixture weight {p} outside [0,1)")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("fraction {x} outside [0,1]")));
    }
    let q = 1.0 - p;
    Ok(xlny(x - 1.0 / q, 1.0 - q * x) - xlny(x + p / q, p + q * x))
}

/// `I(1/2) - I(x)`: the mixture's exponent bound from initial fraction `x`.
///
/// `p = 1` (the pure voter rule) is rejected like in [`mixture_rate`]; its
/// exponent is zero and [`exponent_integral`] returns that directly.
pub fn mixture_exponent(x: f64, p: f64) -> Result<f64> {
    Ok(mixture_rate(0.5, p)? - mixture_rate(x, p)?)
}
