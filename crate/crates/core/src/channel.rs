//! Circulant block channels: FFT-based application, a synthetic sparse
//! exponential-PDP generator, and tap files.

use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::fft::UnitaryDft;
use crate::kv::KeyValues;
use crate::{Error, Result};

/// A length-`L` tap vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<Complex64>,
}

impl ChannelRealization {
    pub fn new(taps: Vec<Complex64>) -> Self {
        Self { taps }
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_sqr()).sum()
    }

    /// `sqrt(M) * F_M [h; 0]`, the eigenvalues of the circulant channel matrix.
    pub fn frequency_response(&self, m: usize) -> Result<Vec<Complex64>> {
        let dft = UnitaryDft::new(m);
        frequency_response_with(&self.taps, &dft)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("l,re,im\n");
        for (l, t) in self.taps.iter().enumerate() {
            out.push_str(&format!("{l},{},{}\n", t.re, t.im));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// `sqrt(M) * F_M [taps; 0]` using a caller-owned transform.
pub fn frequency_response_with(taps: &[Complex64], dft: &UnitaryDft) -> Result<Vec<Complex64>> {
    let m = dft.len();
    if taps.len() > m {
        return Err(Error::invalid(format!(
            "{} taps do not fit in a block of {m}",
            taps.len()
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    buf[..taps.len()].copy_from_slice(taps);
    dft.forward(&mut buf);
    let s = (m as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= s);
    Ok(buf)
}

/// Circular convolution of every column of the `M x K` matrix `x` with `h`,
/// plus `CN(0, noise_var)` noise per entry.
pub fn apply_channel<R: Rng + ?Sized>(
    h: &ChannelRealization,
    x: &[Complex64],
    m: usize,
    noise_var: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if m == 0 || x.len() % m != 0 {
        return Err(Error::invalid(format!(
            "matrix of {} entries is not a whole number of {m}-symbol blocks",
            x.len()
        )));
    }
    if m < h.len() {
        return Err(Error::invalid(format!(
            "block length {m} shorter than channel length {}",
            h.len()
        )));
    }
    if noise_var < 0.0 {
        return Err(Error::invalid("negative noise variance"));
    }
    let dft = UnitaryDft::new(m);
    let hf = frequency_response_with(&h.taps, &dft)?;
    let mut u = x.to_vec();
    for col in u.chunks_mut(m) {
        dft.forward(col);
        col.iter_mut().zip(&hf).for_each(|(c, g)| *c *= g);
        dft.inverse(col);
    }
    if noise_var > 0.0 {
        let sd = (noise_var / 2.0).sqrt();
        for v in u.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += Complex64::new(re * sd, im * sd);
        }
    }
    Ok(u)
}

/// Synthetic sparse channel with an exponentially decaying power-delay profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGenSpec {
    pub taps: usize,
    /// Power decay per tap, in dB.
    pub pdp_decay_db: f64,
    /// Probability that a tap is active.
    pub sparsity: f64,
}

impl Default for ChannelGenSpec {
    fn default() -> Self {
        Self {
            taps: 64,
            pdp_decay_db: 0.4,
            sparsity: 0.25,
        }
    }
}

impl ChannelGenSpec {
    pub fn validate(&self) -> Result<()> {
        if self.taps == 0 {
            return Err(Error::invalid("channel needs at least one tap"));
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return Err(Error::invalid(format!(
                "sparsity {} outside (0, 1]",
                self.sparsity
            )));
        }
        if !self.pdp_decay_db.is_finite() {
            return Err(Error::invalid("non-finite PDP decay"));
        }
        Ok(())
    }

    /// Reads `taps`, `pdp_decay_db`, `sparsity`, falling back to the defaults.
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        let d = Self::default();
        let spec = Self {
            taps: kv.parsed_or("taps", d.taps)?,
            pdp_decay_db: kv.parsed_or("pdp_decay_db", d.pdp_decay_db)?,
            sparsity: kv.parsed_or("sparsity", d.sparsity)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Variance of an active tap `l`, scaled so that `E||h||^2 = 1`.
    pub fn active_variances(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.taps)
            .map(|l| 10f64.powf(-self.pdp_decay_db * l as f64 / 10.0))
            .collect();
        let total: f64 = raw.iter().sum::<f64>() * self.sparsity;
        raw.into_iter().map(|v| v / total).collect()
    }
}

/// Draws `h_l = a_l * g_l` with `a_l ~ Bernoulli(sparsity)` and
/// `g_l ~ CN(0, nu_l)`. If no tap is active, tap 0 is switched on.
pub fn generate_channel<R: Rng + ?Sized>(
    spec: &ChannelGenSpec,
    rng: &mut R,
) -> Result<ChannelRealization> {
    spec.validate()?;
    let vars = spec.active_variances();
    let active: Vec<bool> = (0..spec.taps)
        .map(|_| rng.random_bool(spec.sparsity))
        .collect();
    let any = active.iter().any(|a| *a);
    let taps = vars
        .iter()
        .zip(&active)
        .enumerate()
        .map(|(l, (&v, &on))| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            if on || (!any && l == 0) {
                Complex64::new(re, im) * (v / 2.0).sqrt()
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(ChannelRealization { taps })
}

/// Parses `l,re,im` rows. An `l,re,im` header and `#` comments are allowed;
/// missing lags are zero.
pub fn parse_channel_csv(text: &str) -> Result<ChannelRealization> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<(usize, Complex64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if rows.is_empty() && record.get(0) == Some("l") {
            continue;
        }
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 3 fields, got {}", record.len()),
            });
        }
        let bad = |what: &str| Error::Parse {
            line,
            msg: format!("cannot parse {what}"),
        };
        let l: usize = record[0].parse().map_err(|_| bad("lag"))?;
        let re: f64 = record[1].parse().map_err(|_| bad("real part"))?;
        let im: f64 = record[2].parse().map_err(|_| bad("imaginary part"))?;
        if rows.iter().any(|(k, _)| *k == l) {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate lag {l}"),
            });
        }
        rows.push((l, Complex64::new(re, im)));
    }
    let len = rows
        .iter()
        .map(|(l, _)| l + 1)
        .max()
        .ok_or_else(|| Error::invalid("channel file has no taps"))?;
    let mut taps = vec![Complex64::new(0.0, 0.0); len];
    for (l, v) in rows {
        taps[l] = v;
    }
    Ok(ChannelRealization { taps })
}

pub fn load_channel(path: &Path) -> Result<ChannelRealization> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_channel_csv(&text)
}
