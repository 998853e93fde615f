//! Turbo loop between a soft equalizer and the LDPC decoder.
//!
//! Only extrinsic beliefs cross the boundary: the decoder's extrinsic output
//! becomes the symbol priors, and the equalizer's bit posteriors are divided
//! by those priors before decoding.

use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;

use crate::benchmarks::{lmmse_equalize_exact, lmmse_equalize_fast, BussgangParams};
use crate::coding::{
    bit_beliefs_to_symbol_pmfs, extrinsic_divide, symbol_pmfs_to_bit_beliefs, BeliefKind, BitBeliefs,
    Interleaver, LdpcCode,
};
use crate::denoisers::{symbol_input_moments, BussgangLikelihood, OutputDenoiser, QuantizedLikelihood};
use crate::fft::UnitaryDft;
use crate::frame::{Frame, SymbolPmfs};
use crate::pbigamp::{ChannelPrior, Equalizer, EqualizerConfig};
use crate::quantizer::QuantizedObs;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EqualizerKind {
    /// Joint channel/symbol inference with the exact ADC likelihood.
    Pbigamp,
    /// Joint inference with the linearized (Gaussian) ADC model.
    PbigampBussgang,
    LmmseExact,
    LmmseFast,
}

impl EqualizerKind {
    pub fn name(self) -> &'static str {
        match self {
            EqualizerKind::Pbigamp => "pbigamp",
            EqualizerKind::PbigampBussgang => "pbigamp-bussgang",
            EqualizerKind::LmmseExact => "lmmse",
            EqualizerKind::LmmseFast => "lmmse-fast",
        }
    }

    pub fn is_pbigamp(self) -> bool {
        matches!(self, EqualizerKind::Pbigamp | EqualizerKind::PbigampBussgang)
    }
}

impl FromStr for EqualizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pbigamp" => Ok(EqualizerKind::Pbigamp),
            "pbigamp-bussgang" => Ok(EqualizerKind::PbigampBussgang),
            "lmmse" | "lmmse-exact" => Ok(EqualizerKind::LmmseExact),
            "lmmse-fast" => Ok(EqualizerKind::LmmseFast),
            other => Err(Error::invalid(format!("unknown equalizer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurboConfig {
    pub max_turbo_iters: usize,
    pub equalizer: EqualizerKind,
    pub parity_early_exit: bool,
    pub bp_iters: usize,
    pub eq: EqualizerConfig,
}

impl Default for TurboConfig {
    fn default() -> Self {
        Self {
            max_turbo_iters: 20,
            equalizer: EqualizerKind::Pbigamp,
            parity_early_exit: true,
            bp_iters: crate::coding::DEFAULT_BP_ITERS,
            eq: EqualizerConfig::default(),
        }
    }
}

impl TurboConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_turbo_iters == 0 {
            return Err(Error::Config(vec!["max_turbo_iters must be at least 1".into()]));
        }
        self.eq.validate()
    }
}

/// Channel knowledge handed to the receiver.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelStart {
    /// An initial estimate with its per-tap error variance and, for the
    /// joint equalizers, the tap prior to refine.
    Estimate {
        hhat: Vec<Complex64>,
        hvar: f64,
        prior: crate::pbigamp::GmmPrior,
    },
    /// True taps (perfect channel-state information).
    Known(Vec<Complex64>),
}

/// Everything a receiver sees for one frame.
#[derive(Debug, Clone, Copy)]
pub struct TurboInputs<'a> {
    pub obs: &'a QuantizedObs,
    /// Known pilot and guard values; data entries are ignored.
    pub frame: &'a Frame,
    pub code: &'a LdpcCode,
    pub interleaver: &'a Interleaver,
    /// Noise variance assumed by the receiver.
    pub noise_var: f64,
    pub bussgang: BussgangParams,
    /// True information bits, used only for the trace.
    pub truth: Option<&'a [u8]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurboTraceRow {
    pub iter: usize,
    pub parity_ok: bool,
    pub bit_errors: Option<usize>,
    pub eq_iters: usize,
    pub cumulative_eq_iters: usize,
}

pub fn turbo_trace_csv(rows: &[TurboTraceRow]) -> String {
    let mut out = String::from("turbo_iter,parity_ok,bit_errors,eq_iters,cumulative_eq_iters\n");
    for r in rows {
        let errs = r.bit_errors.map(|e| e.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.iter,
            u8::from(r.parity_ok),
            errs,
            r.eq_iters,
            r.cumulative_eq_iters
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurboOutput {
    pub info_bits: Vec<u8>,
    pub hhat: Vec<Complex64>,
    pub turbo_iters: usize,
    pub eq_iters: usize,
    pub parity_ok: bool,
    pub trace: Vec<TurboTraceRow>,
}

/// Channel state carried from one turbo iteration to the next.
struct ChannelState {
    hhat: Vec<Complex64>,
    hvar: f64,
    prior: ChannelPrior,
}

pub fn run_turbo(inputs: &TurboInputs<'_>, start: ChannelStart, config: &TurboConfig) -> Result<TurboOutput> {
    config.validate()?;
    let frame = inputs.frame;
    let spec = &frame.spec;
    let modulation = spec.modulation;
    let code = inputs.code;
    let coded = spec.coded_bits();
    if coded % code.n() != 0 {
        return Err(Error::invalid(format!(
            "frame carries {coded} coded bits, not a multiple of the code length {}",
            code.n()
        )));
    }
    if inputs.interleaver.len() != coded {
        return Err(Error::Dimension {
            what: "interleaver",
            expected: coded,
            got: inputs.interleaver.len(),
        });
    }
    if inputs.obs.len() != spec.m * spec.k() {
        return Err(Error::Dimension {
            what: "observations",
            expected: spec.m * spec.k(),
            got: inputs.obs.len(),
        });
    }
    let words = coded / code.n();

    let mut chan = match start {
        ChannelStart::Known(h) => ChannelState {
            hhat: h.clone(),
            hvar: 0.0,
            prior: ChannelPrior::Known(h),
        },
        ChannelStart::Estimate { hhat, hvar, prior } => ChannelState {
            hhat,
            hvar,
            prior: ChannelPrior::Gmm(prior),
        },
    };
    let recon = inputs.obs.reconstruct();
    let likelihood: Box<dyn OutputDenoiser + '_> = match config.equalizer {
        EqualizerKind::PbigampBussgang => Box::new(BussgangLikelihood {
            recon: recon.clone(),
            eta: inputs.bussgang.eta,
            eff_noise_var: inputs.bussgang.eff_noise_var,
        }),
        _ => Box::new(QuantizedLikelihood {
            obs: inputs.obs,
            noise_var: inputs.noise_var,
        }),
    };

    // decoder extrinsic output in code order
    let mut dec_ext = BitBeliefs::uniform(coded).with_kind(BeliefKind::Extrinsic);
    let mut decisions = vec![0u8; words * code.k()];
    let mut trace = Vec::new();
    let mut eq_total = 0;
    let mut parity_ok = false;
    for iter in 1..=config.max_turbo_iters {
        let prior_bits = inputs
            .interleaver
            .interleave_beliefs(&dec_ext)?
            .with_kind(BeliefKind::Prior);
        let priors = bit_beliefs_to_symbol_pmfs(modulation, &prior_bits)?;
        let (posteriors, eq_iters) = equalize(inputs, &recon, likelihood.as_ref(), &priors, &mut chan, config)?;
        eq_total += eq_iters;
        let post_bits = symbol_pmfs_to_bit_beliefs(modulation, &posteriors);
        let eq_ext = inputs
            .interleaver
            .deinterleave_beliefs(&extrinsic_divide(&post_bits, &prior_bits)?)?;

        let mut ext_parts = Vec::with_capacity(words);
        parity_ok = true;
        for w in 0..words {
            let range = w * code.n()..(w + 1) * code.n();
            let channel_llrs = eq_ext.slice(range);
            let out = code.decode(&channel_llrs, config.bp_iters)?;
            parity_ok &= out.parity_ok;
            decisions[w * code.k()..(w + 1) * code.k()].copy_from_slice(&out.info);
            ext_parts.push(extrinsic_divide(&out.posterior, &channel_llrs)?);
        }
        dec_ext = BitBeliefs::concat(BeliefKind::Extrinsic, &ext_parts);

        let bit_errors = inputs
            .truth
            .map(|t| t.iter().zip(&decisions).filter(|(a, b)| a != b).count());
        trace.push(TurboTraceRow {
            iter,
            parity_ok,
            bit_errors,
            eq_iters,
            cumulative_eq_iters: eq_total,
        });
        if parity_ok && config.parity_early_exit {
            break;
        }
    }
    Ok(TurboOutput {
        info_bits: decisions,
        hhat: chan.hhat,
        turbo_iters: trace.len(),
        eq_iters: eq_total,
        parity_ok,
        trace,
    })
}

/// One equalizer pass. Returns the symbol posteriors and the number of
/// inner iterations used.
fn equalize(
    inputs: &TurboInputs<'_>,
    recon: &[Complex64],
    likelihood: &dyn OutputDenoiser,
    priors: &SymbolPmfs,
    chan: &mut ChannelState,
    config: &TurboConfig,
) -> Result<(SymbolPmfs, usize)> {
    let frame = inputs.frame;
    let modulation = frame.spec.modulation;
    if config.equalizer.is_pbigamp() {
        let eq = Equalizer::new(frame, priors)?;
        let mut state = eq.init_state(&chan.hhat, chan.hvar)?;
        let run = eq.run(&mut state, likelihood, &mut chan.prior, &config.eq)?;
        chan.hhat = state.hhat;
        chan.hvar = state.hvar;
        let flat = state.symbols.into_iter().flat_map(|s| s.pmf).collect();
        return Ok((SymbolPmfs::from_flat(modulation.order(), flat)?, run.iters));
    }

    let alphabet = modulation.alphabet();
    let mut mu = frame.x.clone();
    let mut v = vec![0.0; mu.len()];
    for (n, &pos) in frame.data_positions.iter().enumerate() {
        let (mean, var) = priors.moments(modulation, &alphabet, n);
        mu[pos] = mean;
        v[pos] = var;
    }
    let out = match config.equalizer {
        EqualizerKind::LmmseExact => lmmse_equalize_exact(recon, &chan.hhat, &inputs.bussgang, &mu, &v, frame.spec.m)?,
        _ => lmmse_equalize_fast(recon, &chan.hhat, &inputs.bussgang, &mu, &v, &UnitaryDft::new(frame.spec.m))?,
    };
    let mut flat = Vec::with_capacity(priors.len() * modulation.order());
    for (n, &pos) in frame.data_positions.iter().enumerate() {
        let rot = modulation.rotation(n);
        let qvar = out.qvar[pos].max(config.eq.var_floor);
        let post = symbol_input_moments(out.qhat[pos] * rot.conj(), qvar, &alphabet, priors.get(n))?;
        flat.extend(post.pmf);
    }
    Ok((SymbolPmfs::from_flat(modulation.order(), flat)?, 1))
}
