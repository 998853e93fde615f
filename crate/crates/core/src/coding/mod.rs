//! Channel coding and the soft-information plumbing between coded bits and
//! data symbols.

mod ldpc;

pub use ldpc::{DecodeOutput, LdpcCode, DEFAULT_BP_ITERS};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::frame::{label_bit, Modulation, SymbolPmfs};
use crate::{Error, Result};

/// Magnitude limit on every stored LLR.
pub const LLR_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeliefKind {
    Prior,
    Posterior,
    Extrinsic,
}

/// Per-coded-bit beliefs held as LLRs `ln(P0/P1)` clamped to `±LLR_CLAMP`.
#[derive(Debug, Clone, PartialEq)]
pub struct BitBeliefs {
    kind: BeliefKind,
    llr: Vec<f64>,
}

impl BitBeliefs {
    pub fn uniform(len: usize) -> Self {
        Self {
            kind: BeliefKind::Prior,
            llr: vec![0.0; len],
        }
    }

    pub fn from_llrs(kind: BeliefKind, mut llr: Vec<f64>) -> Self {
        for l in &mut llr {
            *l = if l.is_nan() { 0.0 } else { l.clamp(-LLR_CLAMP, LLR_CLAMP) };
        }
        Self { kind, llr }
    }

    pub fn from_prob_one(kind: BeliefKind, probs: &[f64]) -> Self {
        Self::from_llrs(kind, probs.iter().map(|&p| ((1.0 - p) / p).ln()).collect())
    }

    pub fn kind(&self) -> BeliefKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.llr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.llr.is_empty()
    }

    pub fn llrs(&self) -> &[f64] {
        &self.llr
    }

    pub fn llrs_mut(&mut self) -> &mut [f64] {
        &mut self.llr
    }

    pub fn prob_one(&self, i: usize) -> f64 {
        prob_one(self.llr[i])
    }

    pub fn hard(&self) -> Vec<u8> {
        self.llr.iter().map(|&l| u8::from(l < 0.0)).collect()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            kind: self.kind,
            llr: self.llr[range].to_vec(),
        }
    }

    pub fn concat(kind: BeliefKind, parts: &[BitBeliefs]) -> Self {
        Self {
            kind,
            llr: parts.iter().flat_map(|p| p.llr.iter().copied()).collect(),
        }
    }

    pub fn with_kind(mut self, kind: BeliefKind) -> Self {
        self.kind = kind;
        self
    }
}

fn prob_one(llr: f64) -> f64 {
    1.0 / (1.0 + llr.exp())
}

/// Seeded uniform permutation; `interleave` sends `input[perm[i]]` to slot `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interleaver {
    perm: Vec<usize>,
}

impl Interleaver {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self { perm }
    }

    pub fn identity(len: usize) -> Self {
        Self {
            perm: (0..len).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn interleave<T: Copy>(&self, input: &[T]) -> Result<Vec<T>> {
        self.check(input.len())?;
        Ok(self.perm.iter().map(|&p| input[p]).collect())
    }

    pub fn deinterleave<T: Copy + Default>(&self, input: &[T]) -> Result<Vec<T>> {
        self.check(input.len())?;
        let mut out = vec![T::default(); input.len()];
        for (&p, &x) in self.perm.iter().zip(input) {
            out[p] = x;
        }
        Ok(out)
    }

    pub fn interleave_beliefs(&self, b: &BitBeliefs) -> Result<BitBeliefs> {
        Ok(BitBeliefs {
            kind: b.kind,
            llr: self.interleave(&b.llr)?,
        })
    }

    pub fn deinterleave_beliefs(&self, b: &BitBeliefs) -> Result<BitBeliefs> {
        Ok(BitBeliefs {
            kind: b.kind,
            llr: self.deinterleave(&b.llr)?,
        })
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.perm.len() {
            return Err(Error::Dimension {
                what: "interleaver input",
                expected: self.perm.len(),
                got: len,
            });
        }
        Ok(())
    }
}

/// Symbol pmf of one group of `A` bit beliefs: the product of the bit
/// probabilities that spell each label.
pub fn bits_to_symbol_pmf(modulation: Modulation, llrs: &[f64]) -> Vec<f64> {
    let mut pmf: Vec<f64> = (0..modulation.order())
        .map(|j| {
            llrs.iter()
                .enumerate()
                .map(|(a, &l)| if label_bit(modulation, j, a) == 1 { prob_one(l) } else { prob_one(-l) })
                .product()
        })
        .collect();
    let s: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|p| *p /= s);
    pmf
}

/// Symbol priors for every data symbol from interleaved coded-bit beliefs.
pub fn bit_beliefs_to_symbol_pmfs(modulation: Modulation, beliefs: &BitBeliefs) -> Result<SymbolPmfs> {
    let a = modulation.bits_per_symbol();
    if beliefs.len() % a != 0 {
        return Err(Error::invalid(format!(
            "{} bit beliefs do not form groups of {a}",
            beliefs.len()
        )));
    }
    let flat: Vec<f64> = beliefs
        .llrs()
        .chunks(a)
        .flat_map(|g| bits_to_symbol_pmf(modulation, g))
        .collect();
    SymbolPmfs::from_flat(modulation.order(), flat)
}

/// `Pr{c_a = 1}` for each bit of a label, summing the pmf over labels with
/// that bit set.
pub fn symbol_pmf_to_bit_probs(modulation: Modulation, pmf: &[f64]) -> Vec<f64> {
    (0..modulation.bits_per_symbol())
        .map(|a| {
            pmf.iter()
                .enumerate()
                .filter(|(j, _)| label_bit(modulation, *j, a) == 1)
                .map(|(_, p)| p)
                .sum::<f64>()
                .clamp(0.0, 1.0)
        })
        .collect()
}

/// Bit LLRs of one symbol pmf, with both label sums formed directly so that
/// confident bits keep their magnitude.
pub fn symbol_pmf_to_bit_llrs(modulation: Modulation, pmf: &[f64]) -> Vec<f64> {
    (0..modulation.bits_per_symbol())
        .map(|a| {
            let (mut p0, mut p1) = (0.0, 0.0);
            for (j, p) in pmf.iter().enumerate() {
                if label_bit(modulation, j, a) == 1 {
                    p1 += p;
                } else {
                    p0 += p;
                }
            }
            (p0 / p1).ln()
        })
        .collect()
}

/// Posterior coded-bit beliefs from the symbol posteriors.
pub fn symbol_pmfs_to_bit_beliefs(modulation: Modulation, pmfs: &SymbolPmfs) -> BitBeliefs {
    let llrs: Vec<f64> = (0..pmfs.len())
        .flat_map(|n| symbol_pmf_to_bit_llrs(modulation, pmfs.get(n)))
        .collect();
    BitBeliefs::from_llrs(BeliefKind::Posterior, llrs)
}

/// Divides the prior out of a posterior: `LLR_post - LLR_prior`, clamped.
pub fn extrinsic_divide(posterior: &BitBeliefs, prior: &BitBeliefs) -> Result<BitBeliefs> {
    if posterior.len() != prior.len() {
        return Err(Error::Dimension {
            what: "prior beliefs",
            expected: posterior.len(),
            got: prior.len(),
        });
    }
    Ok(BitBeliefs::from_llrs(
        BeliefKind::Extrinsic,
        posterior.llr.iter().zip(&prior.llr).map(|(a, b)| a - b).collect(),
    ))
}
