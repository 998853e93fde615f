use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{noise_variance_from_ebn0, PowerMode, Receiver, ScenarioConfig};
use crate::benchmarks::{bussgang_params, compute_eta, golay_channel_estimate};
use crate::channel::{apply_channel, generate_channel, ChannelRealization};
use crate::coding::{Interleaver, LdpcCode};
use crate::frame::{build_frame, map_bits, Frame};
use crate::pbigamp::{GmmPrior, ScaleTarget};
use crate::quantizer::{Bits, QuantizerSpec};
use crate::turbo::{run_turbo, ChannelStart, TurboConfig, TurboInputs};
use crate::{Error, Result};

/// Symbol energy of every modulation and of the pilot and guard sequences.
const SYMBOL_VAR: f64 = 1.0;

pub const CSV_HEADER: &str =
    "receiver,bits,ebn0_db,mismatch_db,ber,nmse,nmse_db,frames,bit_errors,info_bits,mean_turbo_iters,mean_eq_iters,wall_time_s";

/// Aggregate over the trials of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub receiver: String,
    pub bits: Bits,
    pub ebn0_db: f64,
    pub mismatch_db: f64,
    pub ber: f64,
    pub nmse: f64,
    pub frames: usize,
    pub bit_errors: usize,
    pub info_bits: usize,
    pub mean_turbo_iters: f64,
    pub mean_eq_iters: f64,
    pub wall_time_s: f64,
}

impl ResultRow {
    pub fn nmse_db(&self) -> f64 {
        10.0 * self.nmse.log10()
    }

    /// One CSV line in [`CSV_HEADER`] order, without a newline.
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.6e},{:.6e},{:.4},{},{},{},{:.4},{:.4},{:.3}",
            self.receiver,
            self.bits,
            self.ebn0_db,
            self.mismatch_db,
            self.ber,
            self.nmse,
            self.nmse_db(),
            self.frames,
            self.bit_errors,
            self.info_bits,
            self.mean_turbo_iters,
            self.mean_eq_iters,
            self.wall_time_s
        )
    }

    /// Binomial standard deviation of the BER estimate, treating bits as
    /// independent trials.
    pub fn ber_sigma(&self) -> f64 {
        let n = self.info_bits as f64;
        (self.ber * (1.0 - self.ber) / n).sqrt()
    }
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv_line());
        out.push('\n');
    }
    out
}

/// Mean over trials of the per-turbo-iteration state, with frames that
/// stopped early holding their final values.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTraceRow {
    pub receiver: String,
    pub bits: Bits,
    pub ebn0_db: f64,
    pub mismatch_db: f64,
    pub turbo_iter: usize,
    pub ber: f64,
    pub mean_cumulative_eq_iters: f64,
}

pub fn iteration_trace_csv(rows: &[IterationTraceRow]) -> String {
    let mut out = String::from("receiver,bits,ebn0_db,mismatch_db,turbo_iter,ber,mean_cumulative_eq_iters\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.6e},{:.4}",
            r.receiver, r.bits, r.ebn0_db, r.mismatch_db, r.turbo_iter, r.ber, r.mean_cumulative_eq_iters
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub trace: Vec<IterationTraceRow>,
}

/// One receiver on one frame.
#[derive(Debug, Clone)]
struct Outcome {
    bit_errors: usize,
    nmse: f64,
    turbo_iters: usize,
    eq_iters: usize,
    seconds: f64,
    /// `(bit errors, cumulative equalizer iterations)` after each turbo iteration.
    per_iter: Vec<(usize, usize)>,
}

/// Grid point index `(receiver, bits, mismatch)` within one work unit.
fn combos(cfg: &ScenarioConfig) -> Vec<(Receiver, Bits, f64)> {
    let mut out = Vec::new();
    for &r in &cfg.receivers {
        for &b in &cfg.bits {
            for &mm in &cfg.mismatch_db {
                out.push((r, b, mm));
            }
        }
    }
    out
}

/// Shared, read-only state of a sweep.
struct Prepared<'a> {
    cfg: &'a ScenarioConfig,
    code: LdpcCode,
    interleaver: Interleaver,
    skeleton: Frame,
    fixed_channel: Option<ChannelRealization>,
    words: usize,
}

impl Prepared<'_> {
    fn info_bits(&self) -> usize {
        self.words * self.code.k()
    }

    /// Random stream of trial `trial`. Every receiver, bit depth and Eb/N0
    /// point reads the same stream, so a trial keeps its channel, bits and
    /// unit-variance noise draw across the whole grid.
    fn rng(&self, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(trial as u64);
        rng
    }

    fn run_unit(&self, ebn0_idx: usize, trial: usize) -> Result<Vec<Outcome>> {
        let cfg = self.cfg;
        let spec = &cfg.frame;
        let mut rng = self.rng(trial);
        let h = match (&self.fixed_channel, &cfg.channel) {
            (Some(h), _) => h.clone(),
            (None, super::config::ChannelSource::Generate(g)) => generate_channel(g, &mut rng)?,
            (None, _) => unreachable!("file channels are loaded before the sweep"),
        };
        let info: Vec<u8> = (0..self.info_bits()).map(|_| rng.random_range(0..2u8)).collect();
        let mut coded = Vec::with_capacity(spec.coded_bits());
        for word in info.chunks(self.code.k()) {
            coded.extend(self.code.encode(word)?);
        }
        let sent = self.interleaver.interleave(&coded)?;
        let frame = build_frame(spec, &map_bits(spec.modulation, &sent)?)?;
        let rate = self.code.rate();
        let noise_var = noise_variance_from_ebn0(cfg.ebn0_db[ebn0_idx], rate, spec.bits_per_symbol(), SYMBOL_VAR);
        let u = apply_channel(&h, &frame.x, spec.m, noise_var, &mut rng)?;

        let entries = spec.m * spec.k();
        let h_energy = h.energy();
        let rx_power = SYMBOL_VAR * h_energy + noise_var;
        let measured_power = match cfg.measured_power {
            PowerMode::Expected => entries as f64 * rx_power,
            PowerMode::Empirical => u.iter().map(|v| v.norm_sqr()).sum(),
        };
        // prior mean channel energy for generated channels, actual for fixed ones
        let mean_h_energy = if self.fixed_channel.is_some() { h_energy } else { 1.0 };

        let mut outcomes = Vec::new();
        for (receiver, bits, mismatch_db) in combos(cfg) {
            let qspec = match bits {
                Bits::Infinite => QuantizerSpec::unquantized(),
                b => QuantizerSpec::calibrate_complex(b, rx_power)?,
            };
            let obs = qspec.quantize(&u);
            let assumed_nv = noise_var * 10f64.powf(mismatch_db / 10.0);
            let eta = compute_eta(&qspec, rx_power)?;
            let bussgang = bussgang_params(eta, SYMBOL_VAR, mean_h_energy, assumed_nv)?;
            let scale = cfg.scale_enabled(bits).then_some(ScaleTarget {
                measured_power,
                symbol_var: SYMBOL_VAR,
                noise_var: assumed_nv,
            });
            let timer = Instant::now();
            let start = if receiver == Receiver::Pcsi {
                ChannelStart::Known(h.taps.clone())
            } else {
                let recon = obs.reconstruct();
                let est = golay_channel_estimate(&recon, spec, cfg.taps, &bussgang, scale.as_ref())?;
                let energy: f64 = est.hhat.iter().map(|v| v.norm_sqr()).sum();
                ChannelStart::Estimate {
                    prior: GmmPrior::initial(energy, cfg.taps)?,
                    hhat: est.hhat,
                    hvar: est.hvar,
                }
            };
            let turbo_cfg = TurboConfig {
                max_turbo_iters: cfg.max_turbo_iters,
                equalizer: receiver.equalizer(),
                parity_early_exit: true,
                bp_iters: cfg.bp_iters,
                eq: crate::pbigamp::EqualizerConfig {
                    scale,
                    ..cfg.eq.clone()
                },
            };
            let inputs = TurboInputs {
                obs: &obs,
                frame: &self.skeleton,
                code: &self.code,
                interleaver: &self.interleaver,
                noise_var: assumed_nv,
                bussgang,
                truth: Some(&info),
            };
            let out = run_turbo(&inputs, start, &turbo_cfg).map_err(|e| {
                Error::Numerical(format!(
                    "{receiver} at {bits} bits, Eb/N0 index {ebn0_idx}, trial {trial}: {e}"
                ))
            })?;
            let seconds = timer.elapsed().as_secs_f64();
            outcomes.push(Outcome {
                bit_errors: out.info_bits.iter().zip(&info).filter(|(a, b)| a != b).count(),
                nmse: channel_nmse(&out.hhat, &h.taps),
                turbo_iters: out.turbo_iters,
                eq_iters: out.eq_iters,
                seconds,
                per_iter: out
                    .trace
                    .iter()
                    .map(|r| (r.bit_errors.unwrap_or(0), r.cumulative_eq_iters))
                    .collect(),
            });
        }
        Ok(outcomes)
    }
}

/// `||hhat - h||^2 / ||h||^2`, zero-padding the shorter vector.
pub fn channel_nmse(hhat: &[Complex64], h: &[Complex64]) -> f64 {
    let n = hhat.len().max(h.len());
    let zero = Complex64::new(0.0, 0.0);
    let err: f64 = (0..n)
        .map(|i| (hhat.get(i).unwrap_or(&zero) - h.get(i).unwrap_or(&zero)).norm_sqr())
        .sum();
    let energy: f64 = h.iter().map(|v| v.norm_sqr()).sum();
    err / energy
}

/// Runs every `(receiver, bits, Eb/N0, mismatch)` point over `trials`
/// frames on `workers` threads. Results do not depend on `workers`.
pub fn run_sweep(cfg: &ScenarioConfig, workers: usize) -> Result<SweepOutput> {
    cfg.validate()?;
    let code = cfg.load_code()?;
    let spec = &cfg.frame;
    let prepared = Prepared {
        cfg,
        words: spec.coded_bits() / code.n(),
        code,
        interleaver: Interleaver::new(spec.coded_bits(), cfg.interleaver_seed),
        skeleton: Frame::skeleton(spec)?,
        fixed_channel: cfg.load_fixed_channel()?,
    };
    let units: Vec<(usize, usize)> = (0..cfg.ebn0_db.len())
        .flat_map(|e| (0..cfg.trials).map(move |t| (e, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Vec<Outcome>> = pool.install(|| {
        units
            .par_iter()
            .map(|&(e, t)| prepared.run_unit(e, t))
            .collect::<Result<Vec<_>>>()
    })?;

    let combos = combos(cfg);
    let info_bits = prepared.info_bits();
    let mut rows = Vec::new();
    let mut trace = Vec::new();
    for (ci, &(receiver, bits, mismatch_db)) in combos.iter().enumerate() {
        for (e, &ebn0_db) in cfg.ebn0_db.iter().enumerate() {
            let trials: Vec<&Outcome> = (0..cfg.trials).map(|t| &results[e * cfg.trials + t][ci]).collect();
            let frames = trials.len();
            let bit_errors: usize = trials.iter().map(|o| o.bit_errors).sum();
            let mean = |f: &dyn Fn(&Outcome) -> f64| trials.iter().map(|o| f(o)).sum::<f64>() / frames as f64;
            rows.push(ResultRow {
                receiver: receiver.name().to_string(),
                bits,
                ebn0_db,
                mismatch_db,
                ber: bit_errors as f64 / (frames * info_bits) as f64,
                nmse: mean(&|o| o.nmse),
                frames,
                bit_errors,
                info_bits: frames * info_bits,
                mean_turbo_iters: mean(&|o| o.turbo_iters as f64),
                mean_eq_iters: mean(&|o| o.eq_iters as f64),
                wall_time_s: trials.iter().map(|o| o.seconds).sum(),
            });
            for it in 0..cfg.max_turbo_iters {
                let at = |o: &Outcome| o.per_iter[it.min(o.per_iter.len() - 1)];
                let errors: usize = trials.iter().map(|o| at(o).0).sum();
                trace.push(IterationTraceRow {
                    receiver: receiver.name().to_string(),
                    bits,
                    ebn0_db,
                    mismatch_db,
                    turbo_iter: it + 1,
                    ber: errors as f64 / (frames * info_bits) as f64,
                    mean_cumulative_eq_iters: mean(&|o| at(o).1 as f64),
                });
            }
        }
    }
    Ok(SweepOutput { rows, trace })
}
