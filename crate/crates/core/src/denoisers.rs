//! Scalar posterior-moment computations used by the equalizers.
//!
//! * output side: a complex Gaussian `CN(phat, pvar)` observed through the
//!   quantized AWGN channel, or through the linearized model with Gaussian
//!   effective noise;
//! * input side: a Gaussian-mixture channel tap and a discrete data symbol,
//!   each observed in `CN(., rvar)` noise.

use num_complex::Complex64;

use crate::math::{log_cn_zero_mean, softmax_in_place, truncated_ratios};
use crate::quantizer::{Observations, QuantizedObs, QuantizerSpec};
use crate::{Error, Result};

/// Posterior mean of `z` and the sum of its real and imaginary variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputPosterior {
    pub zhat: Complex64,
    pub zvar: f64,
}

/// Per-entry output denoiser.
pub trait OutputDenoiser {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Posterior moments of entry `idx` under the prior `CN(phat, pvar)`.
    fn moments(&self, idx: usize, phat: Complex64, pvar: f64) -> OutputPosterior;
}

/// Posterior mean and variance of one real component with prior
/// `N(p, v)` when `p + noise` (noise variance `noise_var`) lands in `(lo, hi]`.
pub fn interval_component_moments(lo: f64, hi: f64, p: f64, v: f64, noise_var: f64) -> (f64, f64) {
    let s2 = v + noise_var;
    let s = s2.sqrt();
    let alpha = (p - lo) / s;
    let beta = (p - hi) / s;
    let (r1, r2) = truncated_ratios(alpha, beta);
    let mean = p + (v / s) * r1;
    // variance of the standardized truncated observation
    let t = (1.0 + r2 - r1 * r1).max(0.0);
    let var = v * (noise_var / s2) + (v * v / s2) * t;
    (mean, var.clamp(0.0, v))
}

fn checked_pvar(pvar: f64) -> Result<()> {
    if pvar > 0.0 && pvar.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("prior variance must be positive, got {pvar}")))
    }
}

/// Moments of `z` given the bins of `Q(z + w)`, `w ~ CN(0, noise_var)`.
pub fn quantized_output_moments(
    bin_re: u16,
    bin_im: u16,
    phat: Complex64,
    pvar: f64,
    noise_var: f64,
    qspec: &QuantizerSpec,
) -> Result<OutputPosterior> {
    checked_pvar(pvar)?;
    Ok(quantized_unchecked(bin_re, bin_im, phat, pvar, noise_var, qspec))
}

fn quantized_unchecked(
    bin_re: u16,
    bin_im: u16,
    phat: Complex64,
    pvar: f64,
    noise_var: f64,
    q: &QuantizerSpec,
) -> OutputPosterior {
    let (v, nv) = (pvar / 2.0, noise_var / 2.0);
    let (lo, hi) = q.bin_interval(bin_re, q.delta_re);
    let (zr, vr) = interval_component_moments(lo, hi, phat.re, v, nv);
    let (lo, hi) = q.bin_interval(bin_im, q.delta_im);
    let (zi, vi) = interval_component_moments(lo, hi, phat.im, v, nv);
    OutputPosterior {
        zhat: Complex64::new(zr, zi),
        zvar: vr + vi,
    }
}

/// Conjugate update for `y = z + w`, `w ~ CN(0, noise_var)`.
pub fn awgn_output_moments(y: Complex64, phat: Complex64, pvar: f64, noise_var: f64) -> OutputPosterior {
    let denom = pvar + noise_var;
    if denom <= 0.0 {
        return OutputPosterior { zhat: phat, zvar: 0.0 };
    }
    OutputPosterior {
        zhat: (y * pvar + phat * noise_var) / denom,
        zvar: pvar * noise_var / denom,
    }
}

/// Linearized model `y = (1 - eta) z + w~` with `w~ ~ CN(0, eff_noise_var)`,
/// written as `y / (1 - eta) = z + w~ / (1 - eta)`.
pub fn bussgang_output_moments(
    y_recon: Complex64,
    phat: Complex64,
    pvar: f64,
    eta: f64,
    eff_noise_var: f64,
) -> OutputPosterior {
    let gain = 1.0 - eta;
    awgn_output_moments(y_recon / gain, phat, pvar, eff_noise_var / (gain * gain))
}

/// Exact likelihood of the ADC output.
#[derive(Debug, Clone, Copy)]
pub struct QuantizedLikelihood<'a> {
    pub obs: &'a QuantizedObs,
    pub noise_var: f64,
}

impl OutputDenoiser for QuantizedLikelihood<'_> {
    fn len(&self) -> usize {
        self.obs.len()
    }

    fn moments(&self, idx: usize, phat: Complex64, pvar: f64) -> OutputPosterior {
        match &self.obs.data {
            Observations::Bins { re, im } => {
                quantized_unchecked(re[idx], im[idx], phat, pvar, self.noise_var, &self.obs.spec)
            }
            Observations::Raw(y) => awgn_output_moments(y[idx], phat, pvar, self.noise_var),
        }
    }
}

/// Gaussian approximation of the ADC output.
#[derive(Debug, Clone)]
pub struct BussgangLikelihood {
    pub recon: Vec<Complex64>,
    pub eta: f64,
    pub eff_noise_var: f64,
}

impl OutputDenoiser for BussgangLikelihood {
    fn len(&self) -> usize {
        self.recon.len()
    }

    fn moments(&self, idx: usize, phat: Complex64, pvar: f64) -> OutputPosterior {
        bussgang_output_moments(self.recon[idx], phat, pvar, self.eta, self.eff_noise_var)
    }
}

/// Posterior of a Gaussian-mixture tap observed as `rhat = h + CN(0, rvar)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmPosterior {
    pub hhat: Complex64,
    pub hvar: f64,
    /// Posterior component probabilities.
    pub resp: Vec<f64>,
    /// `E[|h|^2 | component d]` under the posterior.
    pub second_moments: Vec<f64>,
}

pub fn gmm_input_moments(
    rhat: Complex64,
    rvar: f64,
    weights: &[f64],
    variances: &[f64],
) -> Result<GmmPosterior> {
    if weights.len() != variances.len() || weights.is_empty() {
        return Err(Error::invalid("mixture weights and variances must be nonempty and equal length"));
    }
    if !(rvar > 0.0) {
        return Err(Error::invalid(format!("rvar must be positive, got {rvar}")));
    }
    if variances.iter().all(|v| *v <= 0.0) {
        return Err(Error::invalid("degenerate mixture: every component variance is zero"));
    }
    let abs2 = rhat.norm_sqr();
    let mut resp: Vec<f64> = weights
        .iter()
        .zip(variances)
        .map(|(&w, &v)| {
            if w > 0.0 {
                w.ln() + log_cn_zero_mean(abs2, v.max(0.0) + rvar)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    if !softmax_in_place(&mut resp) {
        return Err(Error::invalid("mixture weights are all zero"));
    }
    let mut hhat = Complex64::new(0.0, 0.0);
    let mut second = 0.0;
    let mut second_moments = Vec::with_capacity(weights.len());
    for (&lam, &v) in resp.iter().zip(variances) {
        let v = v.max(0.0);
        let g = v / (v + rvar);
        let mean = rhat * g;
        let m2 = g * rvar + mean.norm_sqr();
        hhat += mean * lam;
        second += lam * m2;
        second_moments.push(m2);
    }
    Ok(GmmPosterior {
        hhat,
        hvar: (second - hhat.norm_sqr()).max(0.0),
        resp,
        second_moments,
    })
}

/// Posterior of a discrete symbol observed as `qhat = x + CN(0, qvar)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolPosterior {
    pub pmf: Vec<f64>,
    pub xhat: Complex64,
    pub xvar: f64,
}

pub fn symbol_input_moments(
    qhat: Complex64,
    qvar: f64,
    alphabet: &[Complex64],
    prior: &[f64],
) -> Result<SymbolPosterior> {
    if alphabet.len() != prior.len() {
        return Err(Error::Dimension {
            what: "symbol prior",
            expected: alphabet.len(),
            got: prior.len(),
        });
    }
    if !(qvar > 0.0) {
        return Err(Error::invalid(format!("qvar must be positive, got {qvar}")));
    }
    let mut pmf: Vec<f64> = alphabet
        .iter()
        .zip(prior)
        .map(|(s, &g)| {
            if g > 0.0 {
                g.ln() - (s - qhat).norm_sqr() / qvar
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    if !softmax_in_place(&mut pmf) {
        return Err(Error::invalid("symbol prior has no mass"));
    }
    Ok(symbol_moments(alphabet, pmf))
}

/// Mean and variance of a pmf over `alphabet`.
pub fn symbol_moments(alphabet: &[Complex64], pmf: Vec<f64>) -> SymbolPosterior {
    let xhat: Complex64 = alphabet.iter().zip(&pmf).map(|(s, p)| s * p).sum();
    let xvar = alphabet
        .iter()
        .zip(&pmf)
        .map(|(s, p)| p * (s - xhat).norm_sqr())
        .sum::<f64>()
        .max(0.0);
    SymbolPosterior { pmf, xhat, xvar }
}
