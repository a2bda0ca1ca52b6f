//! Exponential integral evaluation for the fast-RSI closed-form rate.
//!
//! The closed form needs E1(x) = ∫_x^∞ e^{-u}/u du, always in the product
//! e^x · E1(x). [`exp_integral`] evaluates E1 with the classical two-regime
//! scheme: an alternating series around the origin and a continued fraction
//! for x > 1, both good to ~1e-13 relative. [`scaled_exp_integral`] returns
//! the product e^x · E1(x) without ever forming e^x, so it stays finite for
//! arguments up to 1e6 and far beyond (small self-interference variance pushes
//! the argument into that range).

use thiserror::Error;

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Series/continued-fraction switchover.
const SERIES_CUTOFF: f64 = 1.0;

/// Term tolerance for both expansions, relative to the running sum.
const TERM_EPS: f64 = 1e-16;

const MAX_ITER: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SpecialFnError {
    #[error("exponential integral requires x > 0, got {0}")]
    NonPositiveArgument(f64),
}

/// E1(x) = ∫_x^∞ e^{-u}/u du for x > 0.
///
/// Strictly decreasing and positive; diverges logarithmically as x → 0⁺ and
/// decays like e^{-x}/x for large x (underflowing to 0.0 past x ≈ 745, where
/// the true value is below the smallest subnormal).
pub fn exp_integral(x: f64) -> Result<f64, SpecialFnError> {
    if x.is_nan() || x <= 0.0 {
        return Err(SpecialFnError::NonPositiveArgument(x));
    }
    if x <= SERIES_CUTOFF {
        Ok(e1_series(x))
    } else {
        Ok((-x).exp() * e1_continued_fraction_scaled(x))
    }
}

/// e^x · E1(x) for x > 0, computed without forming e^x.
///
/// Bracketed by 1/(x+1) < e^x·E1(x) < 1/x for every positive x, and
/// asymptotically 1/x for large x.
pub fn scaled_exp_integral(x: f64) -> Result<f64, SpecialFnError> {
    if x.is_nan() || x <= 0.0 {
        return Err(SpecialFnError::NonPositiveArgument(x));
    }
    if x <= SERIES_CUTOFF {
        Ok(x.exp() * e1_series(x))
    } else {
        Ok(e1_continued_fraction_scaled(x))
    }
}

/// E1(x) = -γ - ln x + Σ_{k≥1} (-1)^{k+1} x^k / (k · k!), for 0 < x ≤ 1.
fn e1_series(x: f64) -> f64 {
    let mut sum = x; // k = 1 term
    let mut term = x;
    for k in 2..MAX_ITER {
        let k = k as f64;
        // term_k / term_{k-1} = -x (k-1) / k^2
        term *= -x * (k - 1.0) / (k * k);
        sum += term;
        if term.abs() <= sum.abs() * TERM_EPS {
            break;
        }
    }
    -EULER_GAMMA - x.ln() + sum
}

/// e^x · E1(x) = 1 / (x + 1 - 1²/(x + 3 - 2²/(x + 5 - ...))), for x > 1,
/// evaluated with the modified Lentz method.
fn e1_continued_fraction_scaled(x: f64) -> f64 {
    const FPMIN: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() <= TERM_EPS {
            break;
        }
    }
    h
}
