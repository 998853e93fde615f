//! Single-carrier block frames: Golay pilots, guard sequences, data blocks and
//! the bit/symbol mapping.
//!
//! A frame is held as the `M x K` matrix `X` in column-major order (entry
//! `(m, k)` at index `m + k*M`). The first `K_P` columns are pilot blocks;
//! each of the remaining `K_D` columns holds `N_D` data symbols followed by the
//! `N_G`-symbol guard. Prefix samples (the cyclic prefix ahead of the first
//! pilot and the first guard) are not part of `X`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;

use crate::kv::KeyValues;
use crate::{Error, Result};

const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Data-symbol constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modulation {
    /// BPSK rotated by `pi/2` every symbol.
    Pi2Bpsk,
    /// Gray-labelled QPSK.
    Qpsk,
    /// Gray-labelled square 16-QAM.
    Qam16,
}

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Pi2Bpsk => 1,
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }

    pub fn order(self) -> usize {
        1 << self.bits_per_symbol()
    }

    /// Constellation before any per-symbol rotation. Entry `j` carries the
    /// label whose bits, most significant first, are `c_1 .. c_A`.
    pub fn alphabet(self) -> Vec<Complex64> {
        (0..self.order()).map(|j| self.point(j)).collect()
    }

    fn point(self, label: usize) -> Complex64 {
        let a = self.bits_per_symbol();
        let bit = |i: usize| (label >> (a - 1 - i)) & 1;
        match self {
            Modulation::Pi2Bpsk => Complex64::new(if bit(0) == 0 { 1.0 } else { -1.0 }, 0.0),
            Modulation::Qpsk => {
                let level = |b: usize| if b == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
                Complex64::new(level(bit(0)), level(bit(1)))
            }
            Modulation::Qam16 => {
                let scale = 1.0 / 10f64.sqrt();
                let gray = |hi: usize, lo: usize| match (hi, lo) {
                    (0, 0) => -3.0,
                    (0, 1) => -1.0,
                    (1, 1) => 1.0,
                    _ => 3.0,
                };
                Complex64::new(gray(bit(0), bit(1)) * scale, gray(bit(2), bit(3)) * scale)
            }
        }
    }

    /// Phase applied to the data symbol with absolute index `n`.
    pub fn rotation(self, n: usize) -> Complex64 {
        match self {
            Modulation::Pi2Bpsk => match n % 4 {
                0 => Complex64::new(1.0, 0.0),
                1 => Complex64::new(0.0, 1.0),
                2 => Complex64::new(-1.0, 0.0),
                _ => Complex64::new(0.0, -1.0),
            },
            _ => Complex64::new(1.0, 0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Pi2Bpsk => "pi2-bpsk",
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "16qam",
        }
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pi2-bpsk" | "pi/2-bpsk" | "bpsk" => Ok(Modulation::Pi2Bpsk),
            "qpsk" => Ok(Modulation::Qpsk),
            "16qam" | "qam16" | "16-qam" => Ok(Modulation::Qam16),
            other => Err(Error::invalid(format!("unknown modulation {other:?}"))),
        }
    }
}

/// Frame geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpec {
    /// Symbols per block.
    pub m: usize,
    /// Pilot blocks.
    pub k_p: usize,
    /// Data blocks.
    pub k_d: usize,
    /// Data symbols per data block.
    pub n_d: usize,
    /// Guard symbols per data block.
    pub n_g: usize,
    /// Cyclic-prefix length of the pilot blocks.
    pub n_c: usize,
    pub modulation: Modulation,
}

impl FrameSpec {
    /// 802.11ad-sized frame: two 512-symbol pilot blocks, four data blocks of
    /// 448 16-QAM symbols and a 64-symbol guard.
    pub fn ieee_802_11ad() -> Self {
        Self {
            m: 512,
            k_p: 2,
            k_d: 4,
            n_d: 448,
            n_g: 64,
            n_c: 128,
            modulation: Modulation::Qam16,
        }
    }

    /// Small QPSK frame used for desk-scale experiments.
    pub fn desk() -> Self {
        Self {
            m: 64,
            k_p: 2,
            k_d: 4,
            n_d: 48,
            n_g: 16,
            n_c: 16,
            modulation: Modulation::Qpsk,
        }
    }

    pub fn k(&self) -> usize {
        self.k_p + self.k_d
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.modulation.bits_per_symbol()
    }

    pub fn data_symbols(&self) -> usize {
        self.k_d * self.n_d
    }

    pub fn coded_bits(&self) -> usize {
        self.data_symbols() * self.bits_per_symbol()
    }

    /// Length of each Golay sequence in the pilot blocks.
    pub fn golay_len(&self) -> usize {
        self.m / 4
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.m == 0 {
            problems.push("m must be positive".to_string());
        }
        if self.m != self.n_d + self.n_g {
            problems.push(format!(
                "m = {} must equal n_d + n_g = {}",
                self.m,
                self.n_d + self.n_g
            ));
        }
        if self.k_p > 0 {
            let g = self.m / 4;
            if self.m % 4 != 0 || !g.is_power_of_two() || g < 2 || g > 1024 {
                problems.push(format!(
                    "pilot blocks need m/4 to be a power of two in [2, 1024], got m = {}",
                    self.m
                ));
            }
            if self.n_c > g {
                problems.push(format!("n_c = {} exceeds m/4 = {}", self.n_c, g));
            }
        }
        if self.n_c > self.m {
            problems.push(format!("n_c = {} exceeds m = {}", self.n_c, self.m));
        }
        if self.n_g != 0 && (!self.n_g.is_power_of_two() || self.n_g < 2 || self.n_g > 1024) {
            problems.push(format!(
                "n_g = {} must be 0 or a power of two in [2, 1024]",
                self.n_g
            ));
        }
        if self.k() == 0 {
            problems.push("frame has no blocks".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    /// Reads `m, k_p, k_d, n_d, n_g, n_c, modulation`; missing keys fall back
    /// to [`FrameSpec::desk`] except `n_c`, which defaults to `m/4`.
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let d = Self::desk();
        let m = kv.parsed_or("m", d.m)?;
        let spec = Self {
            m,
            k_p: kv.parsed_or("k_p", d.k_p)?,
            k_d: kv.parsed_or("k_d", d.k_d)?,
            n_d: kv.parsed_or("n_d", d.n_d)?,
            n_g: kv.parsed_or("n_g", d.n_g)?,
            n_c: kv.parsed_or("n_c", m / 4)?,
            modulation: kv.parsed_or("modulation", d.modulation)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_kv(&KeyValues::load(path)?)
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "m = {}\nk_p = {}\nk_d = {}\nn_d = {}\nn_g = {}\nn_c = {}\nmodulation = {}\n",
            self.m,
            self.k_p,
            self.k_d,
            self.n_d,
            self.n_g,
            self.n_c,
            self.modulation.name()
        )
    }
}

/// Complementary Golay pair of length `2^log2_len` by recursive doubling
/// `a' = [a, b]`, `b' = [a, -b]` from `a = b = [1]`.
pub fn golay_pair(log2_len: u32) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(1..=10).contains(&log2_len) {
        return Err(Error::invalid(format!(
            "Golay length exponent {log2_len} outside 1..=10"
        )));
    }
    let mut a = vec![1.0];
    let mut b = vec![1.0];
    for _ in 0..log2_len {
        let mut na = a.clone();
        na.extend_from_slice(&b);
        let mut nb = a;
        nb.extend(b.iter().map(|v| -v));
        a = na;
        b = nb;
    }
    Ok((a, b))
}

/// Pilot block `k` (0-based): `[-gb, -ga, gb, -ga]` for even `k`,
/// `[-gb, ga, -gb, -ga]` for odd `k`. Both end in `-ga`, which is also the
/// cyclic prefix, and both have zero periodic autocorrelation for lags below
/// `m/4`.
pub fn pilot_block(spec: &FrameSpec, k: usize) -> Result<Vec<Complex64>> {
    let g = spec.golay_len();
    let (ga, gb) = golay_pair(g.trailing_zeros())?;
    let pattern: [(f64, &[f64]); 4] = if k % 2 == 0 {
        [(-1.0, &gb), (-1.0, &ga), (1.0, &gb), (-1.0, &ga)]
    } else {
        [(-1.0, &gb), (1.0, &ga), (-1.0, &gb), (-1.0, &ga)]
    };
    Ok(pattern
        .iter()
        .flat_map(|(sign, seq)| seq.iter().map(move |v| Complex64::new(sign * v, 0.0)))
        .collect())
}

/// The pilot cyclic prefix `x_C`: the last `n_c` samples of every pilot block.
pub fn pilot_prefix(spec: &FrameSpec) -> Result<Vec<Complex64>> {
    let block = pilot_block(spec, 0)?;
    Ok(block[spec.m - spec.n_c..].to_vec())
}

/// Guard sequence: the length-`n_g` Golay `a` sequence (unit energy per symbol).
pub fn guard_sequence(spec: &FrameSpec) -> Result<Vec<Complex64>> {
    if spec.n_g == 0 {
        return Ok(Vec::new());
    }
    let (ga, _) = golay_pair(spec.n_g.trailing_zeros())?;
    Ok(ga.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
}

/// A frame with its known/unknown partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub spec: FrameSpec,
    /// `M x K`, column-major.
    pub x: Vec<Complex64>,
    /// True at pilot and guard positions.
    pub known: Vec<bool>,
    /// Matrix position of data symbol `n`.
    pub data_positions: Vec<usize>,
}

impl Frame {
    pub fn rows(&self) -> usize {
        self.spec.m
    }

    pub fn cols(&self) -> usize {
        self.spec.k()
    }

    pub fn column(&self, k: usize) -> &[Complex64] {
        &self.x[k * self.spec.m..(k + 1) * self.spec.m]
    }

    /// Coded-symbol index carried at matrix position `pos`, if it is a data position.
    pub fn symbol_index(&self, pos: usize) -> Option<usize> {
        let m = self.spec.m;
        let (row, col) = (pos % m, pos / m);
        if col >= self.spec.k_p && col < self.spec.k() && row < self.spec.n_d {
            Some((col - self.spec.k_p) * self.spec.n_d + row)
        } else {
            None
        }
    }

    /// The same frame with every data symbol set to zero.
    pub fn skeleton(spec: &FrameSpec) -> Result<Self> {
        build_frame(spec, &vec![C_ZERO; spec.data_symbols()])
    }

    pub fn to_csv(&self) -> String {
        let m = self.spec.m;
        let mut out = String::from("row,col,re,im,known\n");
        for (pos, v) in self.x.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                pos % m,
                pos / m,
                v.re,
                v.im,
                u8::from(self.known[pos])
            );
        }
        out
    }
}

/// Assembles `X` from the pilot pattern, guards and data symbols.
pub fn build_frame(spec: &FrameSpec, data_symbols: &[Complex64]) -> Result<Frame> {
    spec.validate()?;
    if data_symbols.len() != spec.data_symbols() {
        return Err(Error::Dimension {
            what: "data symbols",
            expected: spec.data_symbols(),
            got: data_symbols.len(),
        });
    }
    let (m, k) = (spec.m, spec.k());
    let mut x = vec![C_ZERO; m * k];
    let mut known = vec![true; m * k];
    for kp in 0..spec.k_p {
        x[kp * m..(kp + 1) * m].copy_from_slice(&pilot_block(spec, kp)?);
    }
    let guard = guard_sequence(spec)?;
    let mut data_positions = Vec::with_capacity(spec.data_symbols());
    for kd in 0..spec.k_d {
        let base = (spec.k_p + kd) * m;
        for r in 0..spec.n_d {
            let pos = base + r;
            x[pos] = data_symbols[kd * spec.n_d + r];
            known[pos] = false;
            data_positions.push(pos);
        }
        x[base + spec.n_d..base + m].copy_from_slice(&guard);
    }
    Ok(Frame {
        spec: spec.clone(),
        x,
        known,
        data_positions,
    })
}

/// Maps coded bits (groups of `A`, first bit most significant) to data
/// symbols, applying the per-symbol rotation of the modulation.
pub fn map_bits(modulation: Modulation, bits: &[u8]) -> Result<Vec<Complex64>> {
    let a = modulation.bits_per_symbol();
    if bits.len() % a != 0 {
        return Err(Error::invalid(format!(
            "{} bits is not a multiple of {a} bits per symbol",
            bits.len()
        )));
    }
    let alphabet = modulation.alphabet();
    bits.chunks(a)
        .enumerate()
        .map(|(n, group)| {
            let mut label = 0usize;
            for &b in group {
                if b > 1 {
                    return Err(Error::invalid(format!("non-binary input {b}")));
                }
                label = (label << 1) | b as usize;
            }
            Ok(alphabet[label] * modulation.rotation(n))
        })
        .collect()
}

/// Nearest-point hard demapping, inverse of [`map_bits`].
pub fn unmap_hard(modulation: Modulation, symbols: &[Complex64]) -> Vec<u8> {
    let a = modulation.bits_per_symbol();
    let alphabet = modulation.alphabet();
    let mut bits = Vec::with_capacity(symbols.len() * a);
    for (n, s) in symbols.iter().enumerate() {
        let d = s * modulation.rotation(n).conj();
        let label = alphabet
            .iter()
            .enumerate()
            .min_by(|(_, p), (_, q)| (*p - d).norm_sqr().total_cmp(&(*q - d).norm_sqr()))
            .map(|(j, _)| j)
            .unwrap_or(0);
        for i in (0..a).rev() {
            bits.push(((label >> i) & 1) as u8);
        }
    }
    bits
}

/// Bit `a` (0-based, most significant first) of alphabet label `j`.
pub fn label_bit(modulation: Modulation, label: usize, a: usize) -> u8 {
    ((label >> (modulation.bits_per_symbol() - 1 - a)) & 1) as u8
}

/// Per-symbol pmfs over the alphabet labels, row `n` for data symbol `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolPmfs {
    order: usize,
    probs: Vec<f64>,
}

impl SymbolPmfs {
    pub fn uniform(modulation: Modulation, symbols: usize) -> Self {
        let order = modulation.order();
        Self {
            order,
            probs: vec![1.0 / order as f64; order * symbols],
        }
    }

    /// Row-major `symbols x order` probabilities; each row must sum to one.
    pub fn from_flat(order: usize, probs: Vec<f64>) -> Result<Self> {
        if order == 0 || probs.len() % order != 0 {
            return Err(Error::invalid(format!(
                "{} probabilities do not form rows of {order}",
                probs.len()
            )));
        }
        for (n, row) in probs.chunks(order).enumerate() {
            let s: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("row {n} is not a pmf (sum {s})")));
            }
        }
        Ok(Self { order, probs })
    }

    /// Point masses on the given labels.
    pub fn point_masses(modulation: Modulation, labels: &[usize]) -> Self {
        let order = modulation.order();
        let mut probs = vec![0.0; order * labels.len()];
        for (n, &j) in labels.iter().enumerate() {
            probs[n * order + j] = 1.0;
        }
        Self { order, probs }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.probs.len() / self.order
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, n: usize) -> &[f64] {
        &self.probs[n * self.order..(n + 1) * self.order]
    }

    pub fn get_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.probs[n * self.order..(n + 1) * self.order]
    }

    /// Mean and variance of data symbol `n`, including its rotation.
    pub fn moments(&self, modulation: Modulation, alphabet: &[Complex64], n: usize) -> (Complex64, f64) {
        let row = self.get(n);
        let mean: Complex64 = alphabet.iter().zip(row).map(|(s, p)| s * p).sum();
        let var = alphabet
            .iter()
            .zip(row)
            .map(|(s, p)| p * (s - mean).norm_sqr())
            .sum();
        (mean * modulation.rotation(n), var)
    }
}

/// Labels of the symbols produced by [`map_bits`].
pub fn bits_to_labels(modulation: Modulation, bits: &[u8]) -> Vec<usize> {
    bits.chunks(modulation.bits_per_symbol())
        .map(|g| g.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize))
        .collect()
}
