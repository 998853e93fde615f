//! Scalar-variance bilinear GAMP specialized to circulant block channels.
//!
//! The generic algorithm sees `z = vec(H X)` as a bilinear function of the
//! taps `h` and the symbols `X`. Because every block is a circular
//! convolution, all of its inner products reduce to M-point FFTs: one sweep
//! costs `4K + 2 - 2K_P` transforms (pilot-column transforms are cached).
//! [`reference`] holds the dense textbook form used as a test oracle.

mod gmm;
pub mod reference;

use num_complex::Complex64;

use crate::denoisers::{gmm_input_moments, symbol_input_moments, GmmPosterior, OutputDenoiser, SymbolPosterior};
use crate::fft::UnitaryDft;
use crate::frame::{Frame, SymbolPmfs};
use crate::{Error, Result};

pub use gmm::GmmPrior;

const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// What the equalizer knows about the channel.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelPrior {
    /// Unknown taps with a Gaussian-mixture prior.
    Gmm(GmmPrior),
    /// Taps known exactly (perfect channel-state information).
    Known(Vec<Complex64>),
}

/// Target for rescaling the tap estimate to the norm implied by the received
/// power, `||h|| = sqrt((power / (M K) - noise_var) / symbol_var)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleTarget {
    /// `E[||u||^2 | h]` over the whole frame (or its measured value).
    pub measured_power: f64,
    pub symbol_var: f64,
    pub noise_var: f64,
}

impl ScaleTarget {
    /// Target tap norm, or `None` when the radicand is not positive.
    pub fn target_norm(&self, entries: usize) -> Option<f64> {
        let radicand = (self.measured_power / entries as f64 - self.noise_var) / self.symbol_var;
        (radicand > 0.0 && radicand.is_finite()).then(|| radicand.sqrt())
    }
}

/// Rescales `h` to the target norm. Returns `false` (and leaves `h` alone)
/// when the target is undefined or `h` is zero.
pub fn scale_channel(h: &mut [Complex64], target: &ScaleTarget, entries: usize) -> bool {
    let Some(norm) = target.target_norm(entries) else {
        log::warn!("received power below noise floor; channel scaling skipped");
        return false;
    };
    let current = h.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if current <= 0.0 {
        return false;
    }
    let g = norm / current;
    h.iter_mut().for_each(|v| *v *= g);
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualizerConfig {
    pub max_iters: usize,
    pub min_iters: usize,
    /// Stop once `sum |x[t+1] - x[t]|^2 < stop_tol * sum |x[t+1]|^2`.
    pub stop_tol: f64,
    /// Weight of the new value when updating `S`, `X` and `h` (1 = undamped).
    pub damping: f64,
    /// Lower bound on the variances used as divisors.
    pub var_floor: f64,
    pub em: bool,
    pub scale: Option<ScaleTarget>,
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            min_iters: 7,
            stop_tol: 0.01,
            damping: 1.0,
            var_floor: 1e-12,
            em: true,
            scale: None,
        }
    }
}

impl EqualizerConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.stop_tol > 0.0) {
            problems.push(format!("stop_tol must be positive, got {}", self.stop_tol));
        }
        if self.max_iters < self.min_iters || self.max_iters == 0 {
            problems.push(format!(
                "max_iters {} must be positive and at least min_iters {}",
                self.max_iters, self.min_iters
            ));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            problems.push(format!("damping {} outside (0, 1]", self.damping));
        }
        if !(self.var_floor > 0.0) {
            problems.push("var_floor must be positive".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Quantities computed during one sweep, kept for diagnostics and tests.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationRecord {
    pub pvar_bar: f64,
    pub pvar: f64,
    pub zvar: f64,
    pub svar: f64,
    pub rvar: f64,
    pub qvar: f64,
    pub phat: Vec<Complex64>,
    pub zhat: Vec<Complex64>,
    pub rhat: Vec<Complex64>,
    /// Full `M x K` matrix; pilot columns are left at zero since they are never formed.
    pub qhat: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualizerState {
    /// `M x K` symbol estimates, column-major.
    pub xhat: Vec<Complex64>,
    pub xvar: f64,
    pub hhat: Vec<Complex64>,
    pub hvar: f64,
    pub shat: Vec<Complex64>,
    /// Number of completed sweeps.
    pub t: usize,
    /// Posteriors of the data symbols from the latest sweep.
    pub symbols: Vec<SymbolPosterior>,
    pub last: IterationRecord,
}

/// One row of the optional convergence trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub xvar: f64,
    pub hvar: f64,
    pub pvar: f64,
    pub svar: f64,
    /// Relative change `sum|x[t+1]-x[t]|^2 / sum|x[t+1]|^2`.
    pub residual: f64,
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("t,xvar,hvar,pvar,svar,residual\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e}\n",
            r.t, r.xvar, r.hvar, r.pvar, r.svar, r.residual
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub iters: usize,
    pub trace: Vec<TraceRow>,
}

/// Frame-specific data shared by all sweeps: transforms, cached pilot
/// spectra, the alphabet and the data-symbol priors.
pub struct Equalizer<'a> {
    frame: &'a Frame,
    priors: &'a SymbolPmfs,
    dft: UnitaryDft,
    pilot_freq: Vec<Complex64>,
    alphabet: Vec<Complex64>,
    rotations: Vec<Complex64>,
}

impl std::fmt::Debug for Equalizer<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Equalizer").field("spec", &self.frame.spec).finish()
    }
}

impl<'a> Equalizer<'a> {
    /// `frame` supplies the known pilot and guard values (its data entries
    /// are ignored); `priors` holds one pmf per data symbol.
    pub fn new(frame: &'a Frame, priors: &'a SymbolPmfs) -> Result<Self> {
        let spec = &frame.spec;
        let modulation = spec.modulation;
        if priors.len() != spec.data_symbols() || priors.order() != modulation.order() {
            return Err(Error::Dimension {
                what: "symbol priors",
                expected: spec.data_symbols(),
                got: priors.len(),
            });
        }
        let m = spec.m;
        let dft = UnitaryDft::new(m);
        let mut pilot_freq = frame.x[..spec.k_p * m].to_vec();
        for col in pilot_freq.chunks_mut(m) {
            dft.forward(col);
        }
        let rotations = (0..spec.data_symbols()).map(|n| modulation.rotation(n)).collect();
        Ok(Self {
            frame,
            priors,
            dft,
            pilot_freq,
            alphabet: modulation.alphabet(),
            rotations,
        })
    }

    pub fn dft(&self) -> &UnitaryDft {
        &self.dft
    }

    fn dims(&self) -> (usize, usize, usize) {
        let s = &self.frame.spec;
        (s.m, s.k(), s.k_p)
    }

    /// Known entries at their values, data entries at their prior means;
    /// `xvar` is the summed prior variance over `M K`.
    pub fn init_state(&self, hhat_init: &[Complex64], hvar_init: f64) -> Result<EqualizerState> {
        let (m, k, _) = self.dims();
        if hhat_init.is_empty() || hhat_init.len() > m {
            return Err(Error::Dimension {
                what: "initial taps",
                expected: m,
                got: hhat_init.len(),
            });
        }
        let modulation = self.frame.spec.modulation;
        let mut xhat = self.frame.x.clone();
        let mut total_var = 0.0;
        for (n, &pos) in self.frame.data_positions.iter().enumerate() {
            let (mean, var) = self.priors.moments(modulation, &self.alphabet, n);
            xhat[pos] = mean;
            total_var += var;
        }
        Ok(EqualizerState {
            xhat,
            xvar: total_var / (m * k) as f64,
            hhat: hhat_init.to_vec(),
            hvar: hvar_init.max(0.0),
            shat: vec![C_ZERO; m * k],
            t: 0,
            symbols: Vec::new(),
            last: IterationRecord::default(),
        })
    }

    /// `sqrt(M) F [h; 0]`.
    fn tap_spectrum(&self, h: &[Complex64]) -> Vec<Complex64> {
        let m = self.dft.len();
        let mut g = vec![C_ZERO; m];
        g[..h.len()].copy_from_slice(h);
        self.dft.forward(&mut g);
        let s = (m as f64).sqrt();
        g.iter_mut().for_each(|v| *v *= s);
        g
    }

    /// One sweep of the algorithm.
    pub fn iterate(
        &self,
        state: &mut EqualizerState,
        output: &dyn OutputDenoiser,
        channel: &mut ChannelPrior,
        config: &EqualizerConfig,
    ) -> Result<()> {
        let (m, k, k_p) = self.dims();
        let mk = m * k;
        let l = state.hhat.len();
        if output.len() != mk {
            return Err(Error::Dimension {
                what: "observations",
                expected: mk,
                got: output.len(),
            });
        }
        let floor = config.var_floor;
        let beta = config.damping;

        // spectra of the symbol columns; pilot columns come from the cache
        let mut xf = state.xhat.clone();
        xf[..k_p * m].copy_from_slice(&self.pilot_freq);
        for col in xf[k_p * m..].chunks_mut(m) {
            self.dft.forward(col);
        }
        let g = self.tap_spectrum(&state.hhat);

        let h_energy: f64 = state.hhat.iter().map(|v| v.norm_sqr()).sum();
        let x_energy: f64 = state.xhat.iter().map(|v| v.norm_sqr()).sum();
        let pvar_bar = state.xvar * h_energy + (l as f64 / mk as f64) * state.hvar * x_energy;
        let pvar = (pvar_bar + l as f64 * state.hvar * state.xvar).max(floor);

        let mut phat = vec![C_ZERO; mk];
        for c in 0..k {
            let col = &mut phat[c * m..(c + 1) * m];
            for ((p, xv), gv) in col.iter_mut().zip(&xf[c * m..(c + 1) * m]).zip(&g) {
                *p = xv * gv;
            }
            self.dft.inverse(col);
        }
        for (p, s) in phat.iter_mut().zip(&state.shat) {
            *p -= s * pvar_bar;
        }

        let mut zhat = vec![C_ZERO; mk];
        let mut zvar_sum = 0.0;
        for (i, (z, p)) in zhat.iter_mut().zip(&phat).enumerate() {
            let post = output.moments(i, *p, pvar);
            *z = post.zhat;
            zvar_sum += post.zvar;
        }
        let zvar = zvar_sum / mk as f64;
        let svar = ((1.0 - zvar / pvar) / pvar).max(floor);
        for ((s, z), p) in state.shat.iter_mut().zip(&zhat).zip(&phat) {
            let fresh = (z - p) / pvar;
            *s = fresh * beta + *s * (1.0 - beta);
        }

        let mut sf = state.shat.clone();
        for col in sf.chunks_mut(m) {
            self.dft.forward(col);
        }

        // channel side
        let rvar = (1.0 / (svar * x_energy)).max(floor);
        let mut corr = vec![C_ZERO; m];
        for c in 0..k {
            for ((acc, xv), sv) in corr.iter_mut().zip(&xf[c * m..(c + 1) * m]).zip(&sf[c * m..(c + 1) * m]) {
                *acc += xv.conj() * sv;
            }
        }
        self.dft.inverse(&mut corr);
        let sqrt_m = (m as f64).sqrt();
        let h_gain = 1.0 - mk as f64 * rvar * state.xvar * svar;
        let rhat: Vec<Complex64> = (0..l)
            .map(|i| corr[i] * (rvar * sqrt_m) + state.hhat[i] * h_gain)
            .collect();

        // symbol side; pilot columns of Q are never formed
        let qvar = (1.0 / (svar * h_energy)).max(floor);
        let x_gain = 1.0 - l as f64 * qvar * state.hvar * svar;
        let mut qhat = vec![C_ZERO; mk];
        for c in k_p..k {
            let col = &mut qhat[c * m..(c + 1) * m];
            for ((q, sv), gv) in col.iter_mut().zip(&sf[c * m..(c + 1) * m]).zip(&g) {
                *q = gv.conj() * sv;
            }
            self.dft.inverse(col);
            for (q, xv) in col.iter_mut().zip(&state.xhat[c * m..(c + 1) * m]) {
                *q = *q * qvar + xv * x_gain;
            }
        }

        // tap posteriors
        let (h_next, hvar_next) = match channel {
            ChannelPrior::Known(h) => (h.clone(), 0.0),
            ChannelPrior::Gmm(prior) => {
                if prior.taps() != l {
                    return Err(Error::Dimension {
                        what: "prior taps",
                        expected: l,
                        got: prior.taps(),
                    });
                }
                let posts: Vec<GmmPosterior> = rhat
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        let (w, v) = prior.tap(i);
                        gmm_input_moments(*r, rvar, w, v)
                    })
                    .collect::<Result<_>>()?;
                let hvar = posts.iter().map(|p| p.hvar).sum::<f64>() / l as f64;
                let mut h: Vec<Complex64> = posts
                    .iter()
                    .zip(&state.hhat)
                    .map(|(p, old)| p.hhat * beta + old * (1.0 - beta))
                    .collect();
                if config.em {
                    prior.em_update(&posts)?;
                }
                if let Some(target) = &config.scale {
                    scale_channel(&mut h, target, mk);
                }
                (h, hvar)
            }
        };

        // symbol posteriors
        let mut x_next = state.xhat.clone();
        let mut var_sum = 0.0;
        let mut symbols = Vec::with_capacity(self.frame.data_positions.len());
        for (n, &pos) in self.frame.data_positions.iter().enumerate() {
            let rot = self.rotations[n];
            let post = symbol_input_moments(qhat[pos] * rot.conj(), qvar, &self.alphabet, self.priors.get(n))?;
            x_next[pos] = post.xhat * rot * beta + state.xhat[pos] * (1.0 - beta);
            var_sum += post.xvar;
            symbols.push(SymbolPosterior {
                xhat: post.xhat * rot,
                ..post
            });
        }

        state.xhat = x_next;
        state.xvar = var_sum / mk as f64;
        state.hhat = h_next;
        state.hvar = hvar_next;
        state.symbols = symbols;
        state.t += 1;
        state.last = IterationRecord {
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
        };
        let finite = [pvar, zvar, svar, rvar, qvar, state.xvar, state.hvar]
            .iter()
            .all(|v| v.is_finite())
            && state.hhat.iter().all(|v| v.re.is_finite() && v.im.is_finite());
        if !finite {
            return Err(Error::Numerical(format!(
                "non-finite iterate at sweep {} (pvar {pvar}, svar {svar}, rvar {rvar}, qvar {qvar})",
                state.t
            )));
        }
        Ok(())
    }

    /// Iterates until the relative symbol change drops below `stop_tol`
    /// (checked from sweep `min_iters` on) or `max_iters` is reached.
    pub fn run(
        &self,
        state: &mut EqualizerState,
        output: &dyn OutputDenoiser,
        channel: &mut ChannelPrior,
        config: &EqualizerConfig,
    ) -> Result<RunOutput> {
        config.validate()?;
        let mut trace = Vec::new();
        let start = state.t;
        loop {
            let before = state.xhat.clone();
            self.iterate(state, output, channel, config)?;
            let (mut diff, mut norm) = (0.0, 0.0);
            for (a, b) in state.xhat.iter().zip(&before) {
                diff += (a - b).norm_sqr();
                norm += a.norm_sqr();
            }
            let residual = if norm > 0.0 { diff / norm } else { 0.0 };
            trace.push(TraceRow {
                t: state.t,
                xvar: state.xvar,
                hvar: state.hvar,
                pvar: state.last.pvar,
                svar: state.last.svar,
                residual,
            });
            let done = state.t - start;
            if (done >= config.min_iters && diff < config.stop_tol * norm) || done >= config.max_iters {
                return Ok(RunOutput { iters: done, trace });
            }
        }
    }
}
