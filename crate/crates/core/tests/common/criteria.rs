//! Checks shared by the topic tests and the acceptance report. Each returns
//! whether it passed and a one-line summary of what it measured.

use std::time::{Duration, Instant};

use fewbit::benchmarks::{
    compute_eta, golay_channel_estimate, lmmse_equalize_exact, lmmse_equalize_fast, BussgangParams,
};
use fewbit::channel::{apply_channel, ChannelRealization};
use fewbit::denoisers::{gmm_input_moments, QuantizedLikelihood};
use fewbit::fft::UnitaryDft;
use fewbit::frame::{build_frame, golay_pair, map_bits, Frame, FrameSpec, Modulation, SymbolPmfs};
use fewbit::harness::{results_csv, run_sweep, Receiver, ResultRow, ScenarioConfig};
use fewbit::pbigamp::reference::{reference_iteration, BilinearProblem, ReferenceState};
use fewbit::pbigamp::{ChannelPrior, Equalizer, EqualizerConfig, GmmPrior};
use fewbit::quantizer::{gaussian_distortion, mmse_stepsize, Bits, QuantizerSpec};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{
    circulant, dense_lmmse_block, gmm_moments_quadrature, interval_moments_quadrature,
    quantizer_distortion_quadrature, symbol_moments_enumeration,
};

pub struct Check {
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail }
    }

    /// All of `parts` must pass; details are joined.
    fn all(parts: Vec<Check>) -> Self {
        let pass = parts.iter().all(|c| c.pass);
        let detail = parts.iter().map(|c| c.detail.as_str()).collect::<Vec<_>>().join("; ");
        Self { pass, detail }
    }
}

pub fn cn(rng: &mut ChaCha8Rng, var: f64) -> Complex64 {
    let sd = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * sd, im * sd)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn rel_vec(a: &[Complex64], b: &[Complex64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let norm: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (diff / norm.max(1e-300)).sqrt()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn random_frame(spec: &FrameSpec, rng: &mut ChaCha8Rng) -> Frame {
    let bits: Vec<u8> = (0..spec.coded_bits()).map(|_| rng.random_range(0..2u8)).collect();
    build_frame(spec, &map_bits(spec.modulation, &bits).unwrap()).unwrap()
}

fn random_pmfs(modulation: Modulation, n: usize, rng: &mut ChaCha8Rng) -> SymbolPmfs {
    let order = modulation.order();
    let mut probs = Vec::with_capacity(n * order);
    for _ in 0..n {
        let raw: Vec<f64> = (0..order).map(|_| rng.random::<f64>() + 0.05).collect();
        let total: f64 = raw.iter().sum();
        probs.extend(raw.iter().map(|x| x / total));
    }
    SymbolPmfs::from_flat(order, probs).unwrap()
}

pub fn equivalence_spec() -> FrameSpec {
    FrameSpec {
        m: 8,
        k_p: 1,
        k_d: 1,
        n_d: 6,
        n_g: 2,
        n_c: 2,
        modulation: Modulation::Qpsk,
    }
}

/// FFT-form sweeps against the dense generic algorithm on random instances.
/// Returns the worst relative error over `zhat`, `rhat`, `qhat` (data
/// entries) and the scalar variances.
pub fn equivalence_worst(instances: usize, iters: usize, seed: u64) -> f64 {
    let spec = equivalence_spec();
    let (m, k, l) = (spec.m, spec.k(), 3);
    let problem = BilinearProblem::circulant_blocks(m, k, l);
    let skeleton = Frame::skeleton(&spec).unwrap();
    let alphabet = spec.modulation.alphabet();
    let bit_choices = [Bits::Finite(1), Bits::Finite(2), Bits::Finite(3), Bits::Infinite];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..instances {
        let bits = bit_choices[i % bit_choices.len()];
        let h = ChannelRealization::new((0..l).map(|_| cn(&mut rng, 1.0 / l as f64)).collect());
        let frame = random_frame(&spec, &mut rng);
        let nv = log_uniform(&mut rng, 0.01, 0.3);
        let u = apply_channel(&h, &frame.x, m, nv, &mut rng).unwrap();
        let power = h.energy() + nv;
        let q = match bits {
            Bits::Infinite => QuantizerSpec::unquantized(),
            b => QuantizerSpec::calibrate_complex(b, power).unwrap(),
        };
        let obs = q.quantize(&u);
        let like = QuantizedLikelihood { obs: &obs, noise_var: nv };
        let priors = random_pmfs(spec.modulation, spec.data_symbols(), &mut rng);
        let eq = Equalizer::new(&skeleton, &priors).unwrap();
        let h0: Vec<Complex64> = h.taps.iter().map(|t| t + cn(&mut rng, 0.05)).collect();
        let hvar0 = log_uniform(&mut rng, 0.01, 0.1);
        let mut state = eq.init_state(&h0, hvar0).unwrap();
        let gmm = GmmPrior::shared(l, vec![0.3, 0.7], vec![0.02, 0.5]).unwrap();
        let mut channel = ChannelPrior::Gmm(gmm.clone());
        let config = EqualizerConfig {
            damping: 1.0,
            em: false,
            scale: None,
            ..EqualizerConfig::default()
        };
        let mut reference = ReferenceState::new(state.xhat.clone(), state.xvar, state.hhat.clone(), state.hvar);
        for _ in 0..iters {
            eq.iterate(&mut state, &like, &mut channel, &config).unwrap();
            let x_den = |n: usize, q: Complex64, qvar: f64| match skeleton.symbol_index(n) {
                None => (skeleton.x[n], 0.0),
                Some(s) => {
                    let rot = spec.modulation.rotation(s);
                    let (_, mean, var) = symbol_moments_enumeration(q * rot.conj(), qvar, &alphabet, priors.get(s));
                    (mean * rot, var)
                }
            };
            let h_den = |tap: usize, r: Complex64, rvar: f64| {
                let (w, v) = gmm.tap(tap);
                let post = gmm_input_moments(r, rvar, w, v).unwrap();
                (post.hhat, post.hvar)
            };
            let rec = reference_iteration(&problem, &mut reference, &like, x_den, h_den, config.var_floor);
            let fft = &state.last;
            let data: Vec<usize> = skeleton.data_positions.clone();
            let pick = |v: &[Complex64]| data.iter().map(|&p| v[p]).collect::<Vec<_>>();
            let errs = [
                rel_vec(&fft.zhat, &rec.zhat),
                rel_vec(&fft.rhat, &rec.rhat),
                rel_vec(&pick(&fft.qhat), &pick(&rec.qhat)),
                rel(fft.pvar_bar, rec.pvar_bar),
                rel(fft.pvar, rec.pvar),
                rel(fft.zvar, rec.zvar),
                rel(fft.svar, rec.svar),
                rel(fft.rvar, rec.rvar),
                rel(fft.qvar, rec.qvar),
                rel(state.xvar, reference.xvar),
                rel(state.hvar, reference.hvar),
            ];
            worst = errs.iter().fold(worst, |a, &b| a.max(if b.is_nan() { f64::INFINITY } else { b }));
        }
    }
    worst
}

pub fn c1_equivalence() -> Check {
    let start = Instant::now();
    let instances = 200;
    let worst = equivalence_worst(instances, 5, 1);
    let secs = start.elapsed().as_secs_f64();
    Check::new(
        worst <= 1e-8 && secs < 60.0,
        format!("{instances} instances x 5 sweeps, worst relative error {worst:.2e} (<= 1e-8), {secs:.1} s (< 60 s)"),
    )
}

/// Worst relative errors `(mean, variance)` of the quantized output moments
/// against quadrature. Means are compared on the scale of the larger of the
/// mean and the prior standard deviation.
pub fn quantized_output_errors(points: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_mean, mut worst_var) = (0.0f64, 0.0f64);
    for i in 0..points {
        let b = rng.random_range(1..=4u32);
        let q = QuantizerSpec::calibrate_complex(Bits::Finite(b), log_uniform(&mut rng, 0.1, 10.0)).unwrap();
        let pvar = log_uniform(&mut rng, 1e-3, 10.0);
        let nv = if i % 10 == 0 { 0.0 } else { log_uniform(&mut rng, 1e-4, 1.0) };
        let sd = ((pvar + nv) / 2.0).sqrt();
        let levels = 1u16 << b;
        let (br, bi) = (rng.random_range(1..=levels), rng.random_range(1..=levels));
        // offsets measured from a bin edge; a quarter of the points sit far
        // out, up to 30 standard deviations
        let reach = if i % 4 == 0 { 30.0 } else { 4.0 };
        let anchor = |(lo, hi): (f64, f64), rng: &mut ChaCha8Rng| {
            let edge = if !lo.is_finite() || (hi.is_finite() && rng.random::<bool>()) { hi } else { lo };
            edge + rng.random_range(-reach..reach) * sd
        };
        let phat = Complex64::new(
            anchor(q.bin_interval(br, q.delta_re), &mut rng),
            anchor(q.bin_interval(bi, q.delta_im), &mut rng),
        );
        let post = fewbit::denoisers::quantized_output_moments(br, bi, phat, pvar, nv, &q).unwrap();
        let (lo, hi) = q.bin_interval(br, q.delta_re);
        let (mr, vr) = interval_moments_quadrature(lo, hi, phat.re, pvar / 2.0, nv / 2.0);
        let (lo, hi) = q.bin_interval(bi, q.delta_im);
        let (mi, vi) = interval_moments_quadrature(lo, hi, phat.im, pvar / 2.0, nv / 2.0);
        let scale = |m: f64| m.abs().max((pvar / 2.0).sqrt());
        let e_mean = ((post.zhat.re - mr).abs() / scale(mr)).max((post.zhat.im - mi).abs() / scale(mi));
        let e_var = rel(post.zvar, vr + vi);
        worst_mean = worst_mean.max(e_mean);
        worst_var = worst_var.max(e_var);
    }
    (worst_mean, worst_var)
}

/// Worst relative errors `(mean, variance)` of the mixture-tap posterior.
pub fn gmm_errors(cases: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_mean, mut worst_var) = (0.0f64, 0.0f64);
    for _ in 0..cases {
        let d = rng.random_range(1..=3usize);
        let raw: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 0.05).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let v: Vec<f64> = (0..d).map(|_| log_uniform(&mut rng, 1e-3, 2.0)).collect();
        let rvar = log_uniform(&mut rng, 1e-3, 1.0);
        let r = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let post = gmm_input_moments(r, rvar, &w, &v).unwrap();
        let (mean, var) = gmm_moments_quadrature(r, rvar, &w, &v);
        worst_mean = worst_mean.max((post.hhat - mean).norm() / mean.norm().max(rvar.sqrt()));
        worst_var = worst_var.max(rel(post.hvar, var));
    }
    (worst_mean, worst_var)
}

/// Worst absolute error of the symbol posterior pmf, mean and variance.
pub fn symbol_errors(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for modulation in [Modulation::Pi2Bpsk, Modulation::Qpsk, Modulation::Qam16] {
        let alphabet = modulation.alphabet();
        for _ in 0..cases {
            let raw: Vec<f64> = alphabet.iter().map(|_| rng.random::<f64>()).collect();
            let total: f64 = raw.iter().sum();
            let prior: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let qvar = log_uniform(&mut rng, 1e-2, 10.0);
            let q = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let post = fewbit::denoisers::symbol_input_moments(q, qvar, &alphabet, &prior).unwrap();
            let (pmf, mean, var) = symbol_moments_enumeration(q, qvar, &alphabet, &prior);
            for (a, b) in post.pmf.iter().zip(&pmf) {
                worst = worst.max((a - b).abs());
            }
            worst = worst.max((post.xhat - mean).norm()).max((post.xvar - var).abs());
        }
    }
    worst
}

pub fn c2_denoisers() -> Check {
    let (qm, qv) = quantized_output_errors(1000, 2);
    let (gm, gv) = gmm_errors(300, 3);
    let s = symbol_errors(300, 4);
    Check::new(
        qm <= 1e-8 && qv <= 1e-8 && gm <= 1e-8 && gv <= 1e-8 && s <= 1e-12,
        format!(
            "quantized output vs quadrature over 1000 points: mean {qm:.1e}, variance {qv:.1e} (<= 1e-8); \
             mixture tap: mean {gm:.1e}, variance {gv:.1e} (<= 1e-8); symbols {s:.1e} (<= 1e-12)"
        ),
    )
}

/// Normalized distortion of the calibrated ADC on `samples` circular
/// Gaussian draws of power `power`.
pub fn eta_monte_carlo(bits: u32, power: f64, samples: usize, seed: u64) -> f64 {
    let q = QuantizerSpec::calibrate_complex(Bits::Finite(bits), power).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<Complex64> = (0..samples).map(|_| cn(&mut rng, power)).collect();
    let y = q.quantize(&u).reconstruct();
    let err: f64 = u.iter().zip(&y).map(|(a, b)| (a - b).norm_sqr()).sum();
    let energy: f64 = u.iter().map(|a| a.norm_sqr()).sum();
    err / energy
}

pub fn c3_quantizer() -> Check {
    let d1 = mmse_stepsize(1).unwrap();
    let dist1 = quantizer_distortion_quadrature(1, d1);
    let target = 1.0 - 2.0 / std::f64::consts::PI;
    let one_bit = Check::new(
        (dist1 - target).abs() <= 1e-4,
        format!("1-bit distortion {dist1:.6} vs 1-2/pi = {target:.6}"),
    );

    let deltas: Vec<f64> = (1..=8).map(|b| mmse_stepsize(b).unwrap()).collect();
    let decreasing = Check::new(
        deltas.windows(2).all(|w| w[1] < w[0]),
        format!(
            "stepsizes {}",
            deltas.iter().map(|d| format!("{d:.4}")).collect::<Vec<_>>().join(" > ")
        ),
    );

    let mut optimal = true;
    for b in 2..=4 {
        let d = deltas[b as usize - 1];
        let at = quantizer_distortion_quadrature(b, d);
        for eps in [1e-3, 1e-2, 5e-2, 0.1, 0.2] {
            for s in [-1.0, 1.0] {
                if quantizer_distortion_quadrature(b, d * (1.0 + s * eps)) < at {
                    optimal = false;
                }
            }
        }
        // the closed form used for the design agrees with quadrature
        if (gaussian_distortion(b, d) - at).abs() > 1e-10 {
            optimal = false;
        }
    }
    let local = Check::new(optimal, "b = 2..4 locally optimal on a +-0.1%..20% grid".into());

    let inf_eta = compute_eta(&QuantizerSpec::unquantized(), 1.0).unwrap();
    let mut worst = 0.0f64;
    for b in 1..=4 {
        for power in [0.5, 2.0] {
            let q = QuantizerSpec::calibrate_complex(Bits::Finite(b), power).unwrap();
            let eta = compute_eta(&q, power).unwrap();
            let mc = eta_monte_carlo(b, power, 1_000_000, u64::from(b));
            worst = worst.max(rel(eta, mc));
        }
    }
    let eta = Check::new(
        inf_eta == 0.0 && worst <= 0.01,
        format!("eta(inf) = {inf_eta}, eta(b) vs Monte Carlo worst {:.2}% (<= 1%)", worst * 100.0),
    );
    Check::all(vec![one_bit, decreasing, local, eta])
}

/// Aperiodic autocorrelation sums of every pair up to length 1024; returns
/// the lengths that fail the delta property.
pub fn golay_delta_failures() -> Vec<usize> {
    let mut bad = Vec::new();
    for log2 in 1..=10 {
        let (a, b) = golay_pair(log2).unwrap();
        let n = a.len();
        let (a, b): (Vec<i64>, Vec<i64>) = (
            a.iter().map(|&x| x as i64).collect(),
            b.iter().map(|&x| x as i64).collect(),
        );
        let ok = (0..n).all(|lag| {
            let s: i64 = (0..n - lag).map(|i| a[i] * a[i + lag] + b[i] * b[i + lag]).sum();
            s == if lag == 0 { 2 * n as i64 } else { 0 }
        });
        if !ok || a.iter().chain(&b).any(|x| x.abs() != 1) {
            bad.push(n);
        }
    }
    bad
}

/// Worst relative tap error of noiseless unquantized correlation estimates.
pub fn golay_noiseless_worst(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ideal = BussgangParams {
        eta: 0.0,
        eff_noise_var: 0.0,
    };
    let mut worst = 0.0f64;
    for spec in [FrameSpec::desk(), FrameSpec::ieee_802_11ad()] {
        for _ in 0..trials {
            let l = rng.random_range(1..=spec.n_c);
            let h = ChannelRealization::new((0..l).map(|_| cn(&mut rng, 1.0 / l as f64)).collect());
            let frame = random_frame(&spec, &mut rng);
            let u = apply_channel(&h, &frame.x, spec.m, 0.0, &mut rng).unwrap();
            let est = golay_channel_estimate(&u, &spec, l, &ideal, None).unwrap();
            worst = worst.max(rel_vec(&est.hhat, &h.taps));
        }
    }
    worst
}

pub fn c4_golay() -> Check {
    let bad = golay_delta_failures();
    let worst = golay_noiseless_worst(50, 5);
    Check::new(
        bad.is_empty() && worst <= 1e-10,
        format!(
            "delta property holds for lengths 2..1024 ({} failures); noiseless estimate worst error {worst:.1e} (<= 1e-10)",
            bad.len()
        ),
    )
}

/// Worst error of the exact LMMSE equalizer against the dense oracle.
pub fn lmmse_oracle_worst(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let m = [4usize, 8, 16][rng.random_range(0..3)];
        let k = rng.random_range(1..=3usize);
        let l = rng.random_range(1..=m.min(6));
        let h: Vec<Complex64> = (0..l).map(|_| cn(&mut rng, 1.0 / l as f64)).collect();
        let bp = BussgangParams {
            eta: rng.random_range(0.0..0.3),
            eff_noise_var: log_uniform(&mut rng, 1e-3, 1.0),
        };
        let y: Vec<Complex64> = (0..m * k).map(|_| cn(&mut rng, 1.0)).collect();
        let mu: Vec<Complex64> = (0..m * k).map(|_| cn(&mut rng, 0.3)).collect();
        // some entries known, as pilots and guards are
        let v: Vec<f64> = (0..m * k)
            .map(|_| if rng.random_bool(0.25) { 0.0 } else { rng.random_range(0.05..1.0) })
            .collect();
        let out = lmmse_equalize_exact(&y, &h, &bp, &mu, &v, m).unwrap();
        let a = circulant(&h, bp.gain(), m);
        for b in 0..k {
            let r = b * m..(b + 1) * m;
            let (xhat, xvar) = dense_lmmse_block(&a, &y[r.clone()], &mu[r.clone()], &v[r.clone()], bp.eff_noise_var);
            for (i, j) in r.enumerate() {
                worst = worst.max((out.xhat[j] - xhat[i]).norm()).max((out.xvar[j] - xvar[i]).abs());
            }
        }
    }
    worst
}

/// Worst difference between the fast and exact LMMSE for constant prior
/// variance.
pub fn lmmse_fast_worst(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let (m, k) = (16, 3);
        let l = rng.random_range(1..=8usize);
        let h: Vec<Complex64> = (0..l).map(|_| cn(&mut rng, 1.0 / l as f64)).collect();
        let bp = BussgangParams {
            eta: rng.random_range(0.0..0.3),
            eff_noise_var: log_uniform(&mut rng, 1e-3, 1.0),
        };
        let y: Vec<Complex64> = (0..m * k).map(|_| cn(&mut rng, 1.0)).collect();
        let mu: Vec<Complex64> = (0..m * k).map(|_| cn(&mut rng, 0.3)).collect();
        let v = vec![rng.random_range(0.05..1.0); m * k];
        let exact = lmmse_equalize_exact(&y, &h, &bp, &mu, &v, m).unwrap();
        let fast = lmmse_equalize_fast(&y, &h, &bp, &mu, &v, &UnitaryDft::new(m)).unwrap();
        for i in 0..m * k {
            worst = worst
                .max((exact.xhat[i] - fast.xhat[i]).norm())
                .max((exact.xvar[i] - fast.xvar[i]).abs());
        }
    }
    worst
}

/// `(counted, expected)` transforms for one equalizer sweep and one fast
/// LMMSE pass, for each frame layout.
pub fn fft_counts() -> Vec<(String, usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut out = Vec::new();
    let specs = [
        equivalence_spec(),
        FrameSpec::desk(),
        FrameSpec::ieee_802_11ad(),
        FrameSpec {
            k_p: 3,
            k_d: 2,
            ..FrameSpec::desk()
        },
    ];
    for spec in specs {
        let (m, k) = (spec.m, spec.k());
        let h = ChannelRealization::new((0..4).map(|_| cn(&mut rng, 0.25)).collect());
        let frame = random_frame(&spec, &mut rng);
        let u = apply_channel(&h, &frame.x, m, 0.1, &mut rng).unwrap();
        let obs = QuantizerSpec::unquantized().quantize(&u);
        let like = QuantizedLikelihood { obs: &obs, noise_var: 0.1 };
        let skeleton = Frame::skeleton(&spec).unwrap();
        let priors = SymbolPmfs::uniform(spec.modulation, spec.data_symbols());
        let eq = Equalizer::new(&skeleton, &priors).unwrap();
        let mut state = eq.init_state(&h.taps, 0.01).unwrap();
        let mut channel = ChannelPrior::Gmm(GmmPrior::initial(h.energy(), h.len()).unwrap());
        eq.dft().reset_count();
        eq.iterate(&mut state, &like, &mut channel, &EqualizerConfig::default()).unwrap();
        out.push((
            format!("equalizer sweep M={m} K={k} K_P={}", spec.k_p),
            eq.dft().count(),
            4 * k + 2 - 2 * spec.k_p,
        ));
        let dft = UnitaryDft::new(m);
        let bp = BussgangParams {
            eta: 0.0,
            eff_noise_var: 0.1,
        };
        let v = vec![0.5; m * k];
        lmmse_equalize_fast(&u, &h.taps, &bp, &frame.x, &v, &dft).unwrap();
        out.push((format!("fast LMMSE M={m} K={k}"), dft.count(), 4 * k + 1));
    }
    out
}

pub fn c5_lmmse() -> Check {
    let oracle = lmmse_oracle_worst(100, 7);
    let fast = lmmse_fast_worst(50, 8);
    let counts = fft_counts();
    let wrong: Vec<String> = counts
        .iter()
        .filter(|(_, got, want)| got != want)
        .map(|(what, got, want)| format!("{what}: {got} != {want}"))
        .collect();
    Check::new(
        oracle <= 1e-10 && fast <= 1e-10 && wrong.is_empty(),
        format!(
            "exact vs dense oracle {oracle:.1e}, fast vs exact at constant v {fast:.1e} (<= 1e-10); \
             transform counts {}",
            if wrong.is_empty() {
                format!("exact in {} layouts", counts.len())
            } else {
                wrong.join(", ")
            }
        ),
    )
}

/// Sweep CSV with the wall-time column removed.
pub fn csv_without_time(rows: &[ResultRow]) -> String {
    results_csv(rows)
        .lines()
        .map(|line| line.rsplit_once(',').map_or(line, |(head, _)| head).to_string() + "\n")
        .collect()
}

pub fn determinism_config() -> ScenarioConfig {
    ScenarioConfig {
        bits: vec![Bits::Finite(1), Bits::Finite(3), Bits::Infinite],
        ebn0_db: vec![2.0, 6.0],
        trials: 6,
        seed: 9,
        mismatch_db: vec![0.0, 3.0],
        ..ScenarioConfig::desk()
    }
}

pub fn c9_determinism() -> Check {
    let cfg = determinism_config();
    let one = csv_without_time(&run_sweep(&cfg, 1).unwrap().rows);
    let eight = csv_without_time(&run_sweep(&cfg, 8).unwrap().rows);
    let again = csv_without_time(&run_sweep(&cfg, 1).unwrap().rows);
    Check::new(
        one == eight && one == again,
        format!(
            "{} result rows, 1 vs 8 workers {}",
            one.lines().count() - 1,
            if one == eight { "byte-identical" } else { "differ" }
        ),
    )
}

/// Everything the sweep-based criteria need.
pub struct SweepResults {
    pub main: Vec<ResultRow>,
    pub main_time: Duration,
    /// Joint receivers at low bit depths and high Eb/N0.
    pub high_snr: Vec<ResultRow>,
    /// The joint receiver with the assumed noise variance off by +-3 dB.
    pub mismatch: Vec<ResultRow>,
}

pub fn high_snr_config() -> ScenarioConfig {
    ScenarioConfig {
        receivers: vec![Receiver::Pbigamp, Receiver::PbigampBussgang],
        bits: vec![Bits::Finite(1), Bits::Finite(2)],
        ebn0_db: vec![10.0, 12.0],
        ..ScenarioConfig::desk()
    }
}

pub fn mismatch_config() -> ScenarioConfig {
    ScenarioConfig {
        receivers: vec![Receiver::Pbigamp],
        mismatch_db: vec![-3.0, 3.0],
        ..ScenarioConfig::desk()
    }
}

pub fn run_sweeps() -> SweepResults {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let start = Instant::now();
    let main = run_sweep(&ScenarioConfig::desk(), workers).unwrap().rows;
    let main_time = start.elapsed();
    let high_snr = run_sweep(&high_snr_config(), workers).unwrap().rows;
    let mismatch = run_sweep(&mismatch_config(), workers).unwrap().rows;
    SweepResults {
        main,
        main_time,
        high_snr,
        mismatch,
    }
}

fn find<'a>(rows: &'a [ResultRow], receiver: Receiver, bits: Bits, ebn0: f64, mm: f64) -> &'a ResultRow {
    rows.iter()
        .find(|r| r.receiver == receiver.name() && r.bits == bits && r.ebn0_db == ebn0 && r.mismatch_db == mm)
        .unwrap_or_else(|| panic!("no row for {receiver} {bits} {ebn0} {mm}"))
}

fn sigma2(a: &ResultRow, b: &ResultRow) -> f64 {
    (a.ber_sigma().powi(2) + b.ber_sigma().powi(2)).sqrt()
}

/// Noiseless unquantized frames with known taps decode without error in a
/// single turbo iteration. Returns `(frames, failures)`.
pub fn noiseless_pcsi(frames: usize) -> (usize, usize) {
    use fewbit::coding::Interleaver;
    use fewbit::turbo::{run_turbo, ChannelStart, EqualizerKind, TurboConfig, TurboInputs};

    let cfg = ScenarioConfig::desk();
    let spec = cfg.frame.clone();
    let code = cfg.load_code().unwrap();
    let interleaver = Interleaver::new(spec.coded_bits(), cfg.interleaver_seed);
    let skeleton = Frame::skeleton(&spec).unwrap();
    let fewbit::harness::ChannelSource::Generate(gen) = &cfg.channel else {
        unreachable!()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut failures = 0;
    for _ in 0..frames {
        let h = fewbit::channel::generate_channel(gen, &mut rng).unwrap();
        let words = spec.coded_bits() / code.n();
        let info: Vec<u8> = (0..words * code.k()).map(|_| rng.random_range(0..2u8)).collect();
        let mut coded = Vec::new();
        for word in info.chunks(code.k()) {
            coded.extend(code.encode(word).unwrap());
        }
        let sent = interleaver.interleave(&coded).unwrap();
        let frame = build_frame(&spec, &map_bits(spec.modulation, &sent).unwrap()).unwrap();
        let u = apply_channel(&h, &frame.x, spec.m, 0.0, &mut rng).unwrap();
        let obs = QuantizerSpec::unquantized().quantize(&u);
        let inputs = TurboInputs {
            obs: &obs,
            frame: &skeleton,
            code: &code,
            interleaver: &interleaver,
            noise_var: 0.0,
            bussgang: BussgangParams {
                eta: 0.0,
                eff_noise_var: 0.0,
            },
            truth: Some(&info),
        };
        let config = TurboConfig {
            equalizer: EqualizerKind::Pbigamp,
            eq: cfg.eq.clone(),
            ..TurboConfig::default()
        };
        let out = run_turbo(&inputs, ChannelStart::Known(h.taps.clone()), &config).unwrap();
        if out.turbo_iters != 1 || out.info_bits != info {
            failures += 1;
        }
    }
    (frames, failures)
}

pub fn c6_sanity(s: &SweepResults) -> Check {
    let (frames, failures) = noiseless_pcsi(20);
    let noiseless = Check::new(
        failures == 0,
        format!("noiseless inf-bit PCSI: {failures}/{frames} frames needed more than one iteration or had errors"),
    );
    let cfg = ScenarioConfig::desk();
    let mut snr_bad = Vec::new();
    let mut bits_bad = Vec::new();
    for &r in &cfg.receivers {
        for &b in &cfg.bits {
            for w in cfg.ebn0_db.windows(2) {
                let (lo, hi) = (find(&s.main, r, b, w[0], 0.0), find(&s.main, r, b, w[1], 0.0));
                if hi.ber > lo.ber + 2.0 * sigma2(lo, hi) {
                    snr_bad.push(format!("{r} {b} bits {}->{} dB", w[0], w[1]));
                }
            }
        }
        for &e in &cfg.ebn0_db {
            for w in cfg.bits.windows(2) {
                let (coarse, fine) = (find(&s.main, r, w[0], e, 0.0), find(&s.main, r, w[1], e, 0.0));
                if fine.ber > coarse.ber + 2.0 * sigma2(coarse, fine) {
                    bits_bad.push(format!("{r} {e} dB {}->{} bits", w[0], w[1]));
                }
            }
        }
    }
    let secs = s.main_time.as_secs_f64();
    let sweep = Check::new(
        snr_bad.is_empty() && bits_bad.is_empty() && secs < 600.0,
        format!(
            "desk sweep ({} rows, {} trials) in {secs:.0} s (< 600 s); BER rises with Eb/N0 beyond 2 sigma at {} points{}; \
             BER rises with bits beyond 2 sigma at {} points{}",
            s.main.len(),
            cfg.trials,
            snr_bad.len(),
            if snr_bad.is_empty() { String::new() } else { format!(" [{}]", snr_bad.join(", ")) },
            bits_bad.len(),
            if bits_bad.is_empty() { String::new() } else { format!(" [{}]", bits_bad.join(", ")) },
        ),
    );
    Check::all(vec![noiseless, sweep])
}

/// Eb/N0 points counted as mid-to-high SNR on the desk grid.
pub const MID_HIGH_EBN0: [f64; 3] = [4.0, 6.0, 8.0];

pub fn c7_ordering(s: &SweepResults) -> Check {
    let cfg = ScenarioConfig::desk();
    let mut ber_bad = Vec::new();
    let mut compared = 0;
    for &b in &cfg.bits {
        for &e in &cfg.ebn0_db {
            let joint = find(&s.main, Receiver::Pbigamp, b, e, 0.0);
            for bench in [Receiver::Lmmse, Receiver::LmmseFast] {
                let other = find(&s.main, bench, b, e, 0.0);
                if joint.ber > 1e-3 || other.ber > 1e-3 {
                    compared += 1;
                    if joint.ber > other.ber {
                        ber_bad.push(format!("{b} bits {e} dB vs {bench}: {:.3e} > {:.3e}", joint.ber, other.ber));
                    }
                }
            }
        }
    }
    let ber = Check::new(
        ber_bad.is_empty(),
        format!(
            "PBiGAMP BER <= Golay/LMMSE BER at {}/{compared} points{}",
            compared - ber_bad.len(),
            if ber_bad.is_empty() { String::new() } else { format!(" [{}]", ber_bad.join(", ")) }
        ),
    );

    let mut min_gap = f64::INFINITY;
    let mut gap_at = String::new();
    for &b in &cfg.bits {
        for e in MID_HIGH_EBN0 {
            let gap = find(&s.main, Receiver::Lmmse, b, e, 0.0).nmse_db() - find(&s.main, Receiver::Pbigamp, b, e, 0.0).nmse_db();
            if gap < min_gap {
                min_gap = gap;
                gap_at = format!("{b} bits {e} dB");
            }
        }
    }
    let nmse = Check::new(
        min_gap >= 6.0,
        format!("NMSE gap over Golay at Eb/N0 4..8 dB: smallest {min_gap:.2} dB at {gap_at} (>= 6 dB)"),
    );

    let mut close_bad = Vec::new();
    for &b in cfg.bits.iter().filter(|b| **b >= Bits::Finite(3)) {
        for &e in &cfg.ebn0_db {
            let (j, g) = (
                find(&s.main, Receiver::Pbigamp, b, e, 0.0),
                find(&s.main, Receiver::PbigampBussgang, b, e, 0.0),
            );
            if (j.ber - g.ber).abs() >= 2.0 * sigma2(j, g) {
                close_bad.push(format!("{b} bits {e} dB"));
            }
        }
    }
    let close = Check::new(
        close_bad.is_empty(),
        format!(
            "Bussgang within 2 sigma at b >= 3: {} exceptions{}",
            close_bad.len(),
            if close_bad.is_empty() { String::new() } else { format!(" [{}]", close_bad.join(", ")) }
        ),
    );

    let hs = high_snr_config();
    let mut worse = Vec::new();
    let mut worse_ok = true;
    for &b in &hs.bits {
        for &e in &hs.ebn0_db {
            let (j, g) = (
                find(&s.high_snr, Receiver::Pbigamp, b, e, 0.0),
                find(&s.high_snr, Receiver::PbigampBussgang, b, e, 0.0),
            );
            let z = (g.ber - j.ber) / sigma2(j, g).max(1e-300);
            worse_ok &= z > 2.0;
            worse.push(format!("{b} bits {e} dB {:.2e} vs {:.2e} ({z:.1} sigma)", g.ber, j.ber));
        }
    }
    let low_bits = Check::new(worse_ok, format!("Bussgang worse at b <= 2, high SNR: {}", worse.join(", ")));
    Check::all(vec![ber, nmse, close, low_bits])
}

pub fn c8_mismatch(s: &SweepResults) -> Check {
    let cfg = mismatch_config();
    let mut bad = Vec::new();
    let mut total = 0;
    for &b in &cfg.bits {
        for &e in &cfg.ebn0_db {
            let matched = find(&s.main, Receiver::Pbigamp, b, e, 0.0);
            for &mm in &cfg.mismatch_db {
                let off = find(&s.mismatch, Receiver::Pbigamp, b, e, mm);
                total += 1;
                let z = (off.ber - matched.ber).abs() / matched.ber_sigma().max(1e-300);
                if z > 2.0 {
                    bad.push((z, format!("{b} bits {e} dB {mm:+} dB: {:.3e} vs {:.3e} ({z:.1} sigma)", off.ber, matched.ber)));
                }
            }
        }
    }
    bad.sort_by(|x, y| y.0.total_cmp(&x.0));
    let shown: Vec<&str> = bad.iter().take(3).map(|(_, t)| t.as_str()).collect();
    Check::new(
        bad.is_empty(),
        format!(
            "+-3 dB noise-variance mismatch within 2 sigma of matched BER at {}/{total} points{}",
            total - bad.len(),
            if bad.is_empty() { String::new() } else { format!("; worst: {}", shown.join(", ")) }
        ),
    )
}
