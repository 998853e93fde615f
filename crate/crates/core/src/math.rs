//! Scalar special functions shared by the denoisers and the quantizer design.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

const SQRT_PI: f64 = 1.772_453_850_905_516;
const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
const SQRT_PI_OVER_2: f64 = 1.253_314_137_315_500_3;

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Scaled complementary error function `exp(x^2) * erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        if x < -26.6 {
            return f64::INFINITY;
        }
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 5.0 {
        return (x * x).exp() * libm::erfc(x);
    }
    if x.is_infinite() {
        return 0.0;
    }
    // Continued fraction erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))).
    let mut f = x;
    for k in (1..=60).rev() {
        f = x + 0.5 * k as f64 / f;
    }
    1.0 / (SQRT_PI * f)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Phi(x)`.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Ratios of a standard normal truncated to an interval.
///
/// For `alpha >= beta` (either may be infinite) with `E = Phi(alpha) - Phi(beta)`
/// this returns
/// `r1 = (phi(alpha) - phi(beta)) / E` and
/// `r2 = (beta*phi(beta) - alpha*phi(alpha)) / E`.
///
/// With `alpha = (p - lo)/s` and `beta = (p - hi)/s`, a Gaussian `N(p, s^2)`
/// truncated to `(lo, hi]` has mean `p + s*r1` and variance
/// `s^2 * (1 + r2 - r1^2)`.
pub fn truncated_ratios(alpha: f64, beta: f64) -> (f64, f64) {
    debug_assert!(alpha >= beta);
    if beta > 0.0 {
        upper_tail_ratios(alpha, beta)
    } else if alpha < 0.0 {
        let (r1, r2) = upper_tail_ratios(-beta, -alpha);
        (-r1, r2)
    } else {
        let e = 1.0 - std_normal_sf(alpha) - std_normal_sf(-beta);
        let (pa, pb) = (std_normal_pdf(alpha), std_normal_pdf(beta));
        let apa = if alpha.is_finite() { alpha * pa } else { 0.0 };
        let bpb = if beta.is_finite() { beta * pb } else { 0.0 };
        if e > 1e-300 {
            ((pa - pb) / e, (bpb - apa) / e)
        } else {
            point_interval_ratios(alpha, beta)
        }
    }
}

// Both endpoints in the upper tail (alpha > beta > 0). Everything is divided by
// phi(beta) so nothing underflows.
fn upper_tail_ratios(alpha: f64, beta: f64) -> (f64, f64) {
    let (rho, alpha_rho, tail_alpha) = if alpha.is_finite() {
        let rho = (-0.5 * (alpha - beta) * (alpha + beta)).exp();
        (rho, alpha * rho, erfcx(alpha * FRAC_1_SQRT_2) * rho)
    } else {
        (0.0, 0.0, 0.0)
    };
    let e = SQRT_PI_OVER_2 * (erfcx(beta * FRAC_1_SQRT_2) - tail_alpha);
    if e > 1e-300 && e.is_finite() {
        ((rho - 1.0) / e, (beta - alpha_rho) / e)
    } else {
        point_interval_ratios(alpha, beta)
    }
}

// Fallback when the interval probability is lost to rounding: treat the
// interval as a point at its midpoint (or at the finite edge).
fn point_interval_ratios(alpha: f64, beta: f64) -> (f64, f64) {
    let c = match (alpha.is_finite(), beta.is_finite()) {
        (true, true) => 0.5 * (alpha + beta),
        (true, false) => alpha,
        (false, true) => beta,
        (false, false) => 0.0,
    };
    let r1 = -c;
    (r1, r1 * r1 - 1.0)
}

/// `log(sum(exp(v)))` ignoring `-inf` entries; `-inf` for an all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// In-place softmax of log-weights. Returns `false` when every entry is `-inf`.
pub fn softmax_in_place(logits: &mut [f64]) -> bool {
    let lse = log_sum_exp(logits);
    if lse == f64::NEG_INFINITY || lse.is_nan() {
        return false;
    }
    for v in logits.iter_mut() {
        *v = (*v - lse).exp();
    }
    // renormalize: with huge logits the subtraction above can lose all digits
    let total: f64 = logits.iter().sum();
    logits.iter_mut().for_each(|v| *v /= total);
    true
}

/// log of the circular complex Gaussian density `CN(x; 0, var)` at `|x|^2 = abs2`.
pub fn log_cn_zero_mean(abs2: f64, var: f64) -> f64 {
    -(PI * var).ln() - abs2 / var
}
