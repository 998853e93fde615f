//! Uniform mid-rise ADC model applied separately to the real and imaginary
//! parts.
//!
//! With `b` bits and stepsize `delta`, bin `u` in `1..=2^b` covers
//! `(g_{u-1}, g_u]` with `g_u = (u - 2^{b-1}) * delta`, `g_0 = -inf` and
//! `g_{2^b} = +inf`, and is reconstructed as `(u - 2^{b-1} - 1/2) * delta`.
//! An unquantized ("infinite-bit") front end is represented explicitly and
//! stores raw samples.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::math::{std_normal_pdf, std_normal_sf};
use crate::{Error, Result};

pub const MAX_BITS: u32 = 8;

/// ADC resolution per real component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bits {
    Finite(u32),
    Infinite,
}

impl Bits {
    pub fn finite(self) -> Option<u32> {
        match self {
            Bits::Finite(b) => Some(b),
            Bits::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Bits::Infinite)
    }

    pub fn validate(self) -> Result<()> {
        match self {
            Bits::Finite(b) if !(1..=MAX_BITS).contains(&b) => Err(Error::invalid(format!(
                "bit depth {b} outside 1..={MAX_BITS}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bits::Finite(b) => write!(f, "{b}"),
            Bits::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Bits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s == "∞" {
            return Ok(Bits::Infinite);
        }
        let b: u32 = s
            .parse()
            .map_err(|_| Error::invalid(format!("bad bit depth {s:?}")))?;
        let bits = Bits::Finite(b);
        bits.validate()?;
        Ok(bits)
    }
}

/// Mean-squared error of the `b`-bit quantizer with stepsize `delta` on a
/// unit-variance real Gaussian input, summed in closed form over bins.
pub fn gaussian_distortion(b: u32, delta: f64) -> f64 {
    let levels = 1usize << b;
    let half = (levels / 2) as f64;
    let mut total = 0.0;
    for u in 1..=levels {
        let lo = if u == 1 { f64::NEG_INFINITY } else { (u as f64 - 1.0 - half) * delta };
        let hi = if u == levels { f64::INFINITY } else { (u as f64 - half) * delta };
        let c = (u as f64 - half - 0.5) * delta;
        // integral of (x - c)^2 phi(x) over (lo, hi]
        let prob = std_normal_sf(lo) - std_normal_sf(hi);
        let (pl, ph) = (std_normal_pdf(lo), std_normal_pdf(hi));
        let xpl = if lo.is_finite() { lo * pl } else { 0.0 };
        let xph = if hi.is_finite() { hi * ph } else { 0.0 };
        total += prob * (1.0 + c * c) - 2.0 * c * (pl - ph) + xpl - xph;
    }
    total
}

/// Stepsize minimizing [`gaussian_distortion`] for a unit-variance input,
/// by golden-section search on `[0.01, 4]`.
pub fn mmse_stepsize(b: u32) -> Result<f64> {
    Bits::Finite(b).validate()?;
    let f = |d: f64| gaussian_distortion(b, d);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut c) = (0.01, 4.0);
    let mut x1 = c - inv_phi * (c - a);
    let mut x2 = a + inv_phi * (c - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while c - a > 1e-12 {
        if f1 < f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - inv_phi * (c - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (c - a);
            f2 = f(x2);
        }
    }
    Ok(0.5 * (a + c))
}

/// `b, delta_b, distortion` for `b = 1..=max_bits`.
pub fn stepsize_table_csv(max_bits: u32) -> Result<String> {
    let mut out = String::from("bits,delta,distortion\n");
    for b in 1..=max_bits {
        let d = mmse_stepsize(b)?;
        out.push_str(&format!("{b},{d:.10},{:.10}\n", gaussian_distortion(b, d)));
    }
    Ok(out)
}

/// A calibrated quantizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerSpec {
    pub bits: Bits,
    pub delta_re: f64,
    pub delta_im: f64,
}

impl QuantizerSpec {
    pub fn unquantized() -> Self {
        Self {
            bits: Bits::Infinite,
            delta_re: 0.0,
            delta_im: 0.0,
        }
    }

    /// Scales the unit-variance MMSE stepsize by the standard deviation of
    /// each component: `delta = sqrt(power) * delta_b`.
    pub fn calibrate(bits: Bits, power_re: f64, power_im: f64) -> Result<Self> {
        bits.validate()?;
        if !(power_re > 0.0 && power_im > 0.0) {
            return Err(Error::invalid(format!(
                "calibration powers must be positive, got ({power_re}, {power_im})"
            )));
        }
        match bits {
            Bits::Infinite => Ok(Self::unquantized()),
            Bits::Finite(b) => {
                let d = mmse_stepsize(b)?;
                Ok(Self {
                    bits,
                    delta_re: power_re.sqrt() * d,
                    delta_im: power_im.sqrt() * d,
                })
            }
        }
    }

    /// Calibration for a circular complex input of total power `power`.
    pub fn calibrate_complex(bits: Bits, power: f64) -> Result<Self> {
        Self::calibrate(bits, power / 2.0, power / 2.0)
    }

    pub fn levels(&self) -> usize {
        match self.bits {
            Bits::Finite(b) => 1 << b,
            Bits::Infinite => 0,
        }
    }

    fn half(&self) -> i64 {
        (self.levels() / 2) as i64
    }

    pub fn quantize_component(&self, value: f64, delta: f64) -> u16 {
        let n = self.levels() as i64;
        let raw = (value / delta).ceil();
        let idx = if raw.is_nan() {
            self.half()
        } else {
            (raw.clamp(-(n as f64), n as f64) as i64) + self.half()
        };
        idx.clamp(1, n) as u16
    }

    /// `(g_{u-1}, g_u]` for bin `u`; outermost bins are unbounded.
    pub fn bin_interval(&self, bin: u16, delta: f64) -> (f64, f64) {
        let n = self.levels() as i64;
        let u = bin as i64;
        let h = self.half();
        let lo = if u <= 1 { f64::NEG_INFINITY } else { (u - 1 - h) as f64 * delta };
        let hi = if u >= n { f64::INFINITY } else { (u - h) as f64 * delta };
        (lo, hi)
    }

    pub fn reconstruct_component(&self, bin: u16, delta: f64) -> f64 {
        (bin as f64 - self.half() as f64 - 0.5) * delta
    }

    pub fn quantize(&self, u: &[Complex64]) -> QuantizedObs {
        let data = match self.bits {
            Bits::Infinite => Observations::Raw(u.to_vec()),
            Bits::Finite(_) => Observations::Bins {
                re: u.iter().map(|v| self.quantize_component(v.re, self.delta_re)).collect(),
                im: u.iter().map(|v| self.quantize_component(v.im, self.delta_im)).collect(),
            },
        };
        QuantizedObs { spec: *self, data }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Observations {
    /// Bin indices in `1..=2^b` per component.
    Bins { re: Vec<u16>, im: Vec<u16> },
    /// Unquantized samples.
    Raw(Vec<Complex64>),
}

/// ADC output for one frame (`M x K`, column-major).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedObs {
    pub spec: QuantizerSpec,
    pub data: Observations,
}

impl QuantizedObs {
    pub fn len(&self) -> usize {
        match &self.data {
            Observations::Bins { re, .. } => re.len(),
            Observations::Raw(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn reconstruct_at(&self, i: usize) -> Complex64 {
        match &self.data {
            Observations::Bins { re, im } => Complex64::new(
                self.spec.reconstruct_component(re[i], self.spec.delta_re),
                self.spec.reconstruct_component(im[i], self.spec.delta_im),
            ),
            Observations::Raw(v) => v[i],
        }
    }

    pub fn reconstruct(&self) -> Vec<Complex64> {
        (0..self.len()).map(|i| self.reconstruct_at(i)).collect()
    }
}
