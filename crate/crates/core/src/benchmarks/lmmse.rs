use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::BussgangParams;
use crate::channel::frequency_response_with;
use crate::fft::UnitaryDft;
use crate::{Error, Result};

const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
const REL_FLOOR: f64 = 1e-12;

/// Posterior and extrinsic moments for every entry of the `M x K` symbol
/// matrix. Entries with zero prior variance come back as their prior mean
/// with zero variances.
#[derive(Debug, Clone, PartialEq)]
pub struct LmmseOutput {
    pub xhat: Vec<Complex64>,
    pub xvar: Vec<f64>,
    pub qhat: Vec<Complex64>,
    pub qvar: Vec<f64>,
}

impl LmmseOutput {
    fn with_capacity(n: usize) -> Self {
        Self {
            xhat: Vec::with_capacity(n),
            xvar: Vec::with_capacity(n),
            qhat: Vec::with_capacity(n),
            qvar: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, mu: Complex64, v: f64, xhat: Complex64, xvar: f64) {
        let (qhat, qvar) = extrinsic(mu, v, xhat, xvar);
        self.xhat.push(xhat);
        self.xvar.push(xvar);
        self.qhat.push(qhat);
        self.qvar.push(qvar);
    }
}

/// Removes the prior `CN(mu, v)` from the posterior `CN(xhat, xvar)`.
fn extrinsic(mu: Complex64, v: f64, xhat: Complex64, xvar: f64) -> (Complex64, f64) {
    if v <= 0.0 {
        return (mu, 0.0);
    }
    let gap = (v - xvar).max(REL_FLOOR * v);
    ((xhat * v - mu * xvar) / gap, v * xvar / gap)
}

fn check_inputs(y: &[Complex64], hhat: &[Complex64], mu: &[Complex64], v: &[f64], m: usize) -> Result<()> {
    if m == 0 || y.len() % m != 0 {
        return Err(Error::invalid(format!("{} observations do not form {m}-blocks", y.len())));
    }
    if hhat.is_empty() || hhat.len() > m {
        return Err(Error::Dimension {
            what: "channel taps",
            expected: m,
            got: hhat.len(),
        });
    }
    if mu.len() != y.len() || v.len() != y.len() {
        return Err(Error::Dimension {
            what: "symbol priors",
            expected: y.len(),
            got: mu.len().min(v.len()),
        });
    }
    if v.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::invalid("prior variances must be non-negative"));
    }
    Ok(())
}

fn noise_floor(bussgang: &BussgangParams) -> f64 {
    bussgang.eff_noise_var.max(REL_FLOOR)
}

/// LMMSE estimate of `X` from `y = (1 - eta) H X + w~` with the channel
/// estimate taken as exact. Block `k` is solved on its own since the model is
/// block diagonal: `xhat = mu + V A^H (A V A^H + s I)^{-1} (y - A mu)` and
/// `xvar_n = v_n - v_n^2 [A^H (A V A^H + s I)^{-1} A]_nn` with `A = (1 - eta) H`.
pub fn lmmse_equalize_exact(
    y: &[Complex64],
    hhat: &[Complex64],
    bussgang: &BussgangParams,
    mu: &[Complex64],
    v: &[f64],
    m: usize,
) -> Result<LmmseOutput> {
    check_inputs(y, hhat, mu, v, m)?;
    let gain = bussgang.gain();
    let a = DMatrix::from_fn(m, m, |i, j| {
        let lag = (i + m - j) % m;
        if lag < hhat.len() {
            hhat[lag] * gain
        } else {
            C_ZERO
        }
    });
    let noise = Complex64::new(noise_floor(bussgang), 0.0);
    let mut out = LmmseOutput::with_capacity(y.len());
    for ((yb, mb), vb) in y.chunks(m).zip(mu.chunks(m)).zip(v.chunks(m)) {
        if vb.iter().all(|&x| x <= 0.0) {
            for &x in mb {
                out.push(x, 0.0, x, 0.0);
            }
            continue;
        }
        // A V A^H, visiting only the nonzero taps of each column of A
        let mut sigma = DMatrix::from_diagonal_element(m, m, noise);
        for (n, &vn) in vb.iter().enumerate() {
            if vn <= 0.0 {
                continue;
            }
            for (l1, &g1) in hhat.iter().enumerate() {
                let row = (n + l1) % m;
                let g1 = g1 * gain * vn;
                for (l2, &g2) in hhat.iter().enumerate() {
                    sigma[(row, (n + l2) % m)] += g1 * (g2 * gain).conj();
                }
            }
        }
        let chol = sigma
            .cholesky()
            .ok_or_else(|| Error::Numerical("observation covariance is not positive definite".into()))?;
        let mvec = DVector::from_column_slice(mb);
        let resid = DVector::from_column_slice(yb) - &a * &mvec;
        let back = a.adjoint() * chol.solve(&resid);
        // diag(A^H Sigma^-1 A) = column norms of L^-1 A
        let w = chol
            .l()
            .solve_lower_triangular(&a)
            .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
        for n in 0..m {
            let vn = vb[n];
            if vn <= 0.0 {
                out.push(mb[n], 0.0, mb[n], 0.0);
                continue;
            }
            let diag: f64 = w.column(n).norm_squared();
            let xhat = mb[n] + back[n] * vn;
            let xvar = (vn - vn * vn * diag).clamp(0.0, vn);
            out.push(mb[n], vn, xhat, xvar);
        }
    }
    Ok(out)
}

/// As [`lmmse_equalize_exact`] with each block's prior variances replaced by
/// their mean `vbar`, so that every block reduces to a scalar Wiener filter
/// per frequency bin. Uses `4K + 1` transforms of `dft`.
pub fn lmmse_equalize_fast(
    y: &[Complex64],
    hhat: &[Complex64],
    bussgang: &BussgangParams,
    mu: &[Complex64],
    v: &[f64],
    dft: &UnitaryDft,
) -> Result<LmmseOutput> {
    let m = dft.len();
    check_inputs(y, hhat, mu, v, m)?;
    let gain = bussgang.gain();
    let lambda: Vec<Complex64> = frequency_response_with(hhat, dft)?.iter().map(|g| g * gain).collect();
    let noise = noise_floor(bussgang);
    let mut out = LmmseOutput::with_capacity(y.len());
    for ((yb, mb), vb) in y.chunks(m).zip(mu.chunks(m)).zip(v.chunks(m)) {
        let vbar = vb.iter().sum::<f64>() / m as f64;
        // residual y - A mu, formed in time domain
        let mut amu = mb.to_vec();
        dft.forward(&mut amu);
        amu.iter_mut().zip(&lambda).for_each(|(x, l)| *x *= l);
        dft.inverse(&mut amu);
        let mut r: Vec<Complex64> = yb.iter().zip(&amu).map(|(a, b)| a - b).collect();
        dft.forward(&mut r);
        let mut shrink = 0.0;
        for (rv, l) in r.iter_mut().zip(&lambda) {
            let denom = vbar * l.norm_sqr() + noise;
            *rv *= l.conj() * vbar / denom;
            shrink += l.norm_sqr() / denom;
        }
        dft.inverse(&mut r);
        let xvar = (vbar - vbar * vbar * shrink / m as f64).clamp(0.0, vbar);
        for n in 0..m {
            if vb[n] <= 0.0 {
                out.push(mb[n], 0.0, mb[n], 0.0);
            } else {
                out.push(mb[n], vbar, mb[n] + r[n], xvar);
            }
        }
    }
    Ok(out)
}
