//! Dense scalar-variance bilinear GAMP for arbitrary bilinear measurements
//! `z_m = sum_{n,l} h_l z^{(n,l)}_m x_n`.
//!
//! This is the unspecialized algorithm, `O(P N L)` per sweep, kept as a test
//! oracle for the FFT form in the parent module. It applies the same
//! variance floors and has no damping.

use num_complex::Complex64;

use super::IterationRecord;
use crate::denoisers::OutputDenoiser;

const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Measurement tensor stored as `z[(n * L + l) * P + m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearProblem {
    pub p: usize,
    pub n: usize,
    pub l: usize,
    pub z: Vec<Complex64>,
}

impl BilinearProblem {
    /// `z^{(n,l)} = [I_K (x) J_l]_{:, n}` with `J_l` the `l`-step circular delay.
    pub fn circulant_blocks(m: usize, k: usize, l: usize) -> Self {
        let (p, n) = (m * k, m * k);
        let mut z = vec![C_ZERO; n * l * p];
        for col in 0..n {
            let (blk, j) = (col / m, col % m);
            for lag in 0..l {
                let row = blk * m + (j + lag) % m;
                z[(col * l + lag) * p + row] = Complex64::new(1.0, 0.0);
            }
        }
        Self { p, n, l, z }
    }

    pub fn vector(&self, n: usize, l: usize) -> &[Complex64] {
        let start = (n * self.l + l) * self.p;
        &self.z[start..start + self.p]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceState {
    pub xhat: Vec<Complex64>,
    pub xvar: f64,
    pub hhat: Vec<Complex64>,
    pub hvar: f64,
    pub shat: Vec<Complex64>,
}

impl ReferenceState {
    pub fn new(xhat: Vec<Complex64>, xvar: f64, hhat: Vec<Complex64>, hvar: f64) -> Self {
        let p = xhat.len();
        Self {
            xhat,
            xvar,
            hhat,
            hvar,
            shat: vec![C_ZERO; p],
        }
    }
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// One sweep. `x_denoiser(n, qhat, qvar)` and `h_denoiser(l, rhat, rvar)`
/// return posterior `(mean, variance)`.
pub fn reference_iteration<FX, FH>(
    problem: &BilinearProblem,
    state: &mut ReferenceState,
    output: &dyn OutputDenoiser,
    mut x_denoiser: FX,
    mut h_denoiser: FH,
    var_floor: f64,
) -> IterationRecord
where
    FX: FnMut(usize, Complex64, f64) -> (Complex64, f64),
    FH: FnMut(usize, Complex64, f64) -> (Complex64, f64),
{
    let (pp, nn, ll) = (problem.p, problem.n, problem.l);
    let (pf, nf, lf) = (pp as f64, nn as f64, ll as f64);

    // z^(n,*) = sum_l z^(n,l) h_l
    let z_n: Vec<Vec<Complex64>> = (0..nn)
        .map(|n| {
            let mut acc = vec![C_ZERO; pp];
            for (l, h) in state.hhat.iter().enumerate() {
                for (a, z) in acc.iter_mut().zip(problem.vector(n, l)) {
                    *a += z * h;
                }
            }
            acc
        })
        .collect();
    // z^(*,l) = sum_n x_n z^(n,l)
    let z_l: Vec<Vec<Complex64>> = (0..ll)
        .map(|l| {
            let mut acc = vec![C_ZERO; pp];
            for (n, x) in state.xhat.iter().enumerate() {
                for (a, z) in acc.iter_mut().zip(problem.vector(n, l)) {
                    *a += z * x;
                }
            }
            acc
        })
        .collect();
    let mut z_all = vec![C_ZERO; pp];
    for (zn, x) in z_n.iter().zip(&state.xhat) {
        for (a, z) in z_all.iter_mut().zip(zn) {
            *a += z * x;
        }
    }
    let sum_zn: f64 = z_n.iter().map(|v| norm2(v)).sum();
    let sum_zl: f64 = z_l.iter().map(|v| norm2(v)).sum();
    let sum_z: f64 = (0..nn)
        .flat_map(|n| (0..ll).map(move |l| (n, l)))
        .map(|(n, l)| norm2(problem.vector(n, l)))
        .sum();

    let pvar_bar = (state.xvar * sum_zn + state.hvar * sum_zl) / pf;
    let pvar = (pvar_bar + state.xvar * state.hvar * sum_z / pf).max(var_floor);
    let phat: Vec<Complex64> = z_all
        .iter()
        .zip(&state.shat)
        .map(|(z, s)| z - s * pvar_bar)
        .collect();

    let mut zhat = vec![C_ZERO; pp];
    let mut zvar = 0.0;
    for (m, (z, p)) in zhat.iter_mut().zip(&phat).enumerate() {
        let post = output.moments(m, *p, pvar);
        *z = post.zhat;
        zvar += post.zvar;
    }
    zvar /= pf;
    let svar = ((1.0 - zvar / pvar) / pvar).max(var_floor);
    state.shat = zhat.iter().zip(&phat).map(|(z, p)| (z - p) / pvar).collect();

    let rvar = (1.0 / (svar * sum_zl / lf)).max(var_floor);
    let rhat: Vec<Complex64> = (0..ll)
        .map(|l| {
            let col_norm: f64 = (0..nn).map(|n| norm2(problem.vector(n, l))).sum();
            state.hhat[l] + dot_conj(&z_l[l], &state.shat) * rvar
                - state.hhat[l] * (rvar * svar * state.xvar * col_norm)
        })
        .collect();
    let qvar = (1.0 / (svar * sum_zn / nf)).max(var_floor);
    let qhat: Vec<Complex64> = (0..nn)
        .map(|n| {
            let row_norm: f64 = (0..ll).map(|l| norm2(problem.vector(n, l))).sum();
            state.xhat[n] + dot_conj(&z_n[n], &state.shat) * qvar
                - state.xhat[n] * (qvar * svar * state.hvar * row_norm)
        })
        .collect();

    let mut hvar = 0.0;
    for (l, r) in rhat.iter().enumerate() {
        let (mean, var) = h_denoiser(l, *r, rvar);
        state.hhat[l] = mean;
        hvar += var;
    }
    state.hvar = hvar / lf;
    let mut xvar = 0.0;
    for (n, q) in qhat.iter().enumerate() {
        let (mean, var) = x_denoiser(n, *q, qvar);
        state.xhat[n] = mean;
        xvar += var;
    }
    state.xvar = xvar / nf;

    IterationRecord {
        pvar_bar,
        pvar,
        zvar,
        svar,
        rvar,
        qvar,
        phat,
        zhat,
        rhat,
        qhat,
    }
}
