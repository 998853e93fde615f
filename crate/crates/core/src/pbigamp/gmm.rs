//! Zero-mean complex Gaussian-mixture prior on the channel taps and its EM
//! refinement.

use crate::denoisers::GmmPosterior;
use crate::math::{log_cn_zero_mean, log_sum_exp};
use crate::{Error, Result};

const VAR_FLOOR: f64 = 1e-12;
const EMPTY_MASS: f64 = 1e-12;

/// Mixture weights and variances, either shared by all taps or one row per tap.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmPrior {
    components: usize,
    taps: usize,
    per_tap: bool,
    weights: Vec<f64>,
    variances: Vec<f64>,
}

impl GmmPrior {
    pub fn shared(taps: usize, weights: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let prior = Self {
            components: weights.len(),
            taps,
            per_tap: false,
            weights,
            variances,
        };
        prior.validate()?;
        Ok(prior)
    }

    /// Row-major `taps x components` parameters.
    pub fn per_tap(taps: usize, components: usize, weights: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let prior = Self {
            components,
            taps,
            per_tap: true,
            weights,
            variances,
        };
        prior.validate()?;
        Ok(prior)
    }

    /// Two-component starting point around an initial estimate: equal
    /// weights, variances `1.9 p` and `0.1 p` with `p = ||h_init||^2 / L`.
    pub fn initial(h_init_energy: f64, taps: usize) -> Result<Self> {
        if taps == 0 {
            return Err(Error::invalid("prior needs at least one tap"));
        }
        let p = (h_init_energy / taps as f64).max(VAR_FLOOR);
        Self::shared(taps, vec![0.5, 0.5], vec![1.9 * p, 0.1 * p])
    }

    fn validate(&self) -> Result<()> {
        let rows = if self.per_tap { self.taps } else { 1 };
        let d = self.components;
        if d == 0 || self.taps == 0 {
            return Err(Error::invalid("mixture needs at least one component and one tap"));
        }
        if self.weights.len() != rows * d || self.variances.len() != rows * d {
            return Err(Error::Dimension {
                what: "mixture parameters",
                expected: rows * d,
                got: self.weights.len().min(self.variances.len()),
            });
        }
        for r in 0..rows {
            let w = &self.weights[r * d..(r + 1) * d];
            let sum: f64 = w.iter().sum();
            if w.iter().any(|x| !(*x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("mixture weights of row {r} sum to {sum}")));
            }
            if self.variances[r * d..(r + 1) * d].iter().any(|v| !(*v > 0.0)) {
                return Err(Error::invalid(format!("mixture variances of row {r} must be positive")));
            }
        }
        Ok(())
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn is_per_tap(&self) -> bool {
        self.per_tap
    }

    /// `(weights, variances)` governing tap `l`.
    pub fn tap(&self, l: usize) -> (&[f64], &[f64]) {
        let d = self.components;
        let r = if self.per_tap { l } else { 0 };
        (&self.weights[r * d..(r + 1) * d], &self.variances[r * d..(r + 1) * d])
    }

    /// Mean tap power `sum_d lambda_d nu_d`, averaged over taps.
    pub fn mean_power(&self) -> f64 {
        let total: f64 = (0..self.taps)
            .map(|l| {
                let (w, v) = self.tap(l);
                w.iter().zip(v).map(|(a, b)| a * b).sum::<f64>()
            })
            .sum();
        total / self.taps as f64
    }

    /// Marginal log-likelihood of observations `rhat_l = h_l + CN(0, rvar)`.
    pub fn log_likelihood(&self, rhat: &[num_complex::Complex64], rvar: f64) -> f64 {
        rhat.iter()
            .enumerate()
            .map(|(l, r)| {
                let (w, v) = self.tap(l);
                let terms: Vec<f64> = w
                    .iter()
                    .zip(v)
                    .map(|(a, b)| {
                        if *a > 0.0 {
                            a.ln() + log_cn_zero_mean(r.norm_sqr(), b + rvar)
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .collect();
                log_sum_exp(&terms)
            })
            .sum()
    }

    /// EM M-step from the per-tap posteriors: `lambda_d` becomes the mean
    /// responsibility and `nu_d` the responsibility-weighted posterior second
    /// moment. A component whose total responsibility vanishes keeps its
    /// previous variance.
    pub fn em_update(&mut self, posts: &[GmmPosterior]) -> Result<()> {
        if posts.len() != self.taps {
            return Err(Error::Dimension {
                what: "tap posteriors",
                expected: self.taps,
                got: posts.len(),
            });
        }
        let d = self.components;
        if self.per_tap {
            for (l, post) in posts.iter().enumerate() {
                update_row(
                    &mut self.weights[l * d..(l + 1) * d],
                    &mut self.variances[l * d..(l + 1) * d],
                    std::slice::from_ref(post),
                );
            }
        } else {
            update_row(&mut self.weights, &mut self.variances, posts);
        }
        Ok(())
    }
}

fn update_row(weights: &mut [f64], variances: &mut [f64], posts: &[GmmPosterior]) {
    let n = posts.len() as f64;
    for (c, (w, v)) in weights.iter_mut().zip(variances.iter_mut()).enumerate() {
        let mass: f64 = posts.iter().map(|p| p.resp[c]).sum();
        *w = mass / n;
        if mass > EMPTY_MASS {
            let m2: f64 = posts.iter().map(|p| p.resp[c] * p.second_moments[c]).sum();
            *v = (m2 / mass).max(VAR_FLOOR);
        }
    }
}
