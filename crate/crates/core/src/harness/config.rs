use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::channel::{load_channel, ChannelGenSpec, ChannelRealization};
use crate::coding::{LdpcCode, DEFAULT_BP_ITERS};
use crate::frame::FrameSpec;
use crate::kv::{parse_list, KeyValues};
use crate::pbigamp::EqualizerConfig;
use crate::quantizer::Bits;
use crate::turbo::EqualizerKind;
use crate::{Error, Result};

/// A receiver under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Receiver {
    Pbigamp,
    PbigampBussgang,
    Lmmse,
    LmmseFast,
    /// Joint equalizer given the true channel.
    Pcsi,
}

impl Receiver {
    pub const ALL: [Receiver; 5] = [
        Receiver::Pbigamp,
        Receiver::PbigampBussgang,
        Receiver::Lmmse,
        Receiver::LmmseFast,
        Receiver::Pcsi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Receiver::Pbigamp => "pbigamp",
            Receiver::PbigampBussgang => "pbigamp-bussgang",
            Receiver::Lmmse => "lmmse",
            Receiver::LmmseFast => "lmmse-fast",
            Receiver::Pcsi => "pcsi",
        }
    }

    pub fn equalizer(self) -> EqualizerKind {
        match self {
            Receiver::Pbigamp | Receiver::Pcsi => EqualizerKind::Pbigamp,
            Receiver::PbigampBussgang => EqualizerKind::PbigampBussgang,
            Receiver::Lmmse => EqualizerKind::LmmseExact,
            Receiver::LmmseFast => EqualizerKind::LmmseFast,
        }
    }
}

impl fmt::Display for Receiver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Receiver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Receiver::ALL
            .into_iter()
            .find(|r| r.name() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown receiver {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSource {
    Generate(ChannelGenSpec),
    /// Fixed taps used for every trial.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum CodeSource {
    Generate { length: usize, seed: u64 },
    File(PathBuf),
}

/// Whether the tap estimate is rescaled to the norm implied by the
/// received power.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleMode {
    /// On for finite bit depths, off without quantization.
    Auto,
    On,
    Off,
}

impl FromStr for ScaleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(ScaleMode::Auto),
            "on" | "true" | "1" => Ok(ScaleMode::On),
            "off" | "false" | "0" => Ok(ScaleMode::Off),
            other => Err(Error::invalid(format!("unknown scale mode {other:?}"))),
        }
    }
}

/// Source of the received power used by the norm rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerMode {
    /// `M K (sigma_x^2 ||h||^2 + sigma_w^2)`.
    Expected,
    /// `||u||^2` of the unquantized received frame.
    Empirical,
}

impl FromStr for PowerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "expected" => Ok(PowerMode::Expected),
            "empirical" => Ok(PowerMode::Empirical),
            other => Err(Error::invalid(format!("unknown power mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub frame: FrameSpec,
    pub channel: ChannelSource,
    /// Taps estimated by the receivers.
    pub taps: usize,
    pub bits: Vec<Bits>,
    pub ebn0_db: Vec<f64>,
    pub receivers: Vec<Receiver>,
    pub trials: usize,
    pub seed: u64,
    /// Assumed-minus-true noise variance, in dB.
    pub mismatch_db: Vec<f64>,
    pub code: CodeSource,
    pub interleaver_seed: u64,
    pub max_turbo_iters: usize,
    pub bp_iters: usize,
    pub eq: EqualizerConfig,
    pub scale: ScaleMode,
    pub measured_power: PowerMode,
}

const KNOWN_KEYS: &[&str] = &[
    "m",
    "k_p",
    "k_d",
    "n_d",
    "n_g",
    "n_c",
    "modulation",
    "taps",
    "pdp_decay_db",
    "sparsity",
    "channel_file",
    "bits",
    "ebn0_db",
    "receivers",
    "trials",
    "seed",
    "mismatch_db",
    "code",
    "code_length",
    "code_seed",
    "interleaver_seed",
    "max_turbo_iters",
    "bp_iters",
    "eq_max_iters",
    "eq_min_iters",
    "eq_stop_tol",
    "eq_damping",
    "em",
    "scale",
    "measured_power",
];

/// Undamped sweeps oscillate on the short desk-scale blocks: the first
/// channel update lands near `h - hhat` while the data symbols are unknown.
pub const HARNESS_DAMPING: f64 = 0.8;

impl ScenarioConfig {
    /// Desk-scale scenario: the small QPSK frame, sparse 12-tap channels, a
    /// length-384 rate-1/2 code.
    pub fn desk() -> Self {
        Self {
            frame: FrameSpec::desk(),
            channel: ChannelSource::Generate(ChannelGenSpec {
                taps: 12,
                pdp_decay_db: 0.4,
                sparsity: 0.25,
            }),
            taps: 12,
            bits: vec![Bits::Finite(2), Bits::Finite(3), Bits::Finite(4), Bits::Infinite],
            ebn0_db: vec![0.0, 2.0, 4.0, 6.0, 8.0],
            receivers: Receiver::ALL.to_vec(),
            trials: 200,
            seed: 1,
            mismatch_db: vec![0.0],
            code: CodeSource::Generate { length: 384, seed: 1 },
            interleaver_seed: 1,
            max_turbo_iters: 20,
            bp_iters: DEFAULT_BP_ITERS,
            eq: EqualizerConfig {
                damping: HARNESS_DAMPING,
                ..EqualizerConfig::default()
            },
            scale: ScaleMode::Auto,
            measured_power: PowerMode::Expected,
        }
    }

    /// Reads a scenario from `key = value` pairs; absent keys keep their
    /// desk-scale defaults. Relative file paths resolve against `base_dir`.
    /// Every problem found is reported at once.
    pub fn from_kv(kv: &KeyValues, base_dir: &Path) -> Result<Self> {
        let mut problems = Vec::new();
        for key in kv.keys() {
            if !KNOWN_KEYS.contains(&key) {
                problems.push(format!("unknown key {key:?}"));
            }
        }
        let d = Self::desk();
        let mut note = |r: Result<()>| {
            if let Err(e) = r {
                match e {
                    Error::Config(list) => problems.extend(list),
                    other => problems.push(other.to_string()),
                }
            }
        };
        let mut cfg = d.clone();
        note(FrameSpec::from_kv(kv).map(|f| cfg.frame = f));
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_relative() {
                base_dir.join(p)
            } else {
                p
            }
        };
        if let Some(path) = kv.get("channel_file") {
            cfg.channel = ChannelSource::File(resolve(path));
        } else {
            let mut gen_kv = kv.clone();
            if gen_kv.get("taps").is_none() {
                gen_kv.set("taps", cfg.taps.to_string());
            }
            if let ChannelSource::Generate(g) = &d.channel {
                if gen_kv.get("pdp_decay_db").is_none() {
                    gen_kv.set("pdp_decay_db", g.pdp_decay_db.to_string());
                }
                if gen_kv.get("sparsity").is_none() {
                    gen_kv.set("sparsity", g.sparsity.to_string());
                }
            }
            note(ChannelGenSpec::from_kv(&gen_kv).map(|g| cfg.channel = ChannelSource::Generate(g)));
        }
        note(kv.parsed_or("taps", d.taps).map(|v| cfg.taps = v));
        note(kv.list::<Bits>("bits").map(|v| cfg.bits = v.unwrap_or(d.bits.clone())));
        note(kv.list::<f64>("ebn0_db").map(|v| cfg.ebn0_db = v.unwrap_or(d.ebn0_db.clone())));
        note(kv.list::<Receiver>("receivers").map(|v| cfg.receivers = v.unwrap_or(d.receivers.clone())));
        note(kv.parsed_or("trials", d.trials).map(|v| cfg.trials = v));
        note(kv.parsed_or("seed", d.seed).map(|v| cfg.seed = v));
        note(kv.list::<f64>("mismatch_db").map(|v| cfg.mismatch_db = v.unwrap_or(d.mismatch_db.clone())));
        if let Some(path) = kv.get("code") {
            cfg.code = CodeSource::File(resolve(path));
        } else {
            let length = kv.parsed_or("code_length", cfg.frame.coded_bits());
            let seed = kv.parsed_or("code_seed", 1u64);
            match (length, seed) {
                (Ok(length), Ok(seed)) => cfg.code = CodeSource::Generate { length, seed },
                (l, s) => {
                    note(l.map(|_| ()));
                    note(s.map(|_| ()));
                }
            }
        }
        note(kv.parsed_or("interleaver_seed", d.interleaver_seed).map(|v| cfg.interleaver_seed = v));
        note(kv.parsed_or("max_turbo_iters", d.max_turbo_iters).map(|v| cfg.max_turbo_iters = v));
        note(kv.parsed_or("bp_iters", d.bp_iters).map(|v| cfg.bp_iters = v));
        note(kv.parsed_or("eq_max_iters", d.eq.max_iters).map(|v| cfg.eq.max_iters = v));
        note(kv.parsed_or("eq_min_iters", d.eq.min_iters).map(|v| cfg.eq.min_iters = v));
        note(kv.parsed_or("eq_stop_tol", d.eq.stop_tol).map(|v| cfg.eq.stop_tol = v));
        note(kv.parsed_or("eq_damping", d.eq.damping).map(|v| cfg.eq.damping = v));
        note(kv.parsed_or("em", d.eq.em).map(|v| cfg.eq.em = v));
        note(kv.parsed_or("scale", d.scale).map(|v| cfg.scale = v));
        note(kv.parsed_or("measured_power", d.measured_power).map(|v| cfg.measured_power = v));
        note(cfg.validate());
        if problems.is_empty() {
            Ok(cfg)
        } else {
            problems.dedup();
            Err(Error::Config(problems))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let kv = KeyValues::load(path)?;
        Self::from_kv(&kv, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if let Err(e) = self.frame.validate() {
            match e {
                Error::Config(list) => problems.extend(list),
                other => problems.push(other.to_string()),
            }
        }
        if self.trials == 0 {
            problems.push("trials must be at least 1".into());
        }
        for (name, empty) in [
            ("bits", self.bits.is_empty()),
            ("ebn0_db", self.ebn0_db.is_empty()),
            ("receivers", self.receivers.is_empty()),
            ("mismatch_db", self.mismatch_db.is_empty()),
        ] {
            if empty {
                problems.push(format!("{name} must not be empty"));
            }
        }
        if self.ebn0_db.iter().chain(&self.mismatch_db).any(|x| !x.is_finite()) {
            problems.push("grids must be finite".into());
        }
        let max_taps = self.max_taps();
        if self.taps == 0 || self.taps > max_taps {
            problems.push(format!("taps {} outside 1..={max_taps}", self.taps));
        }
        if let ChannelSource::Generate(g) = &self.channel {
            if g.taps > max_taps {
                problems.push(format!(
                    "channel length {} exceeds min(n_c, n_g) - 1 = {max_taps}",
                    g.taps
                ));
            }
        }
        if let CodeSource::Generate { length, .. } = self.code {
            if length < 2 || self.frame.coded_bits() % length != 0 {
                problems.push(format!(
                    "code length {length} does not divide the {} coded bits per frame",
                    self.frame.coded_bits()
                ));
            }
        }
        if self.max_turbo_iters == 0 {
            problems.push("max_turbo_iters must be at least 1".into());
        }
        if let Err(Error::Config(list)) = self.eq.validate() {
            problems.extend(list);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn load_code(&self) -> Result<LdpcCode> {
        let code = match &self.code {
            CodeSource::Generate { length, seed } => LdpcCode::generate(*length, length / 2, *seed)?,
            CodeSource::File(path) => LdpcCode::load_alist(path)?,
        };
        if self.frame.coded_bits() % code.n() != 0 {
            return Err(Error::Config(vec![format!(
                "code length {} does not divide the {} coded bits per frame",
                code.n(),
                self.frame.coded_bits()
            )]));
        }
        Ok(code)
    }

    pub fn load_fixed_channel(&self) -> Result<Option<ChannelRealization>> {
        match &self.channel {
            ChannelSource::Generate(_) => Ok(None),
            ChannelSource::File(path) => {
                let h = load_channel(path)?;
                if h.len() > self.max_taps() {
                    return Err(Error::Config(vec![format!(
                        "channel file has {} taps, more than min(n_c, n_g) - 1 = {}",
                        h.len(),
                        self.max_taps()
                    )]));
                }
                Ok(Some(h))
            }
        }
    }

    /// Longest channel the guard interval and the pilot correlation window
    /// can absorb.
    pub fn max_taps(&self) -> usize {
        self.frame.n_c.min(self.frame.n_g).saturating_sub(1)
    }

    pub fn scale_enabled(&self, bits: Bits) -> bool {
        match self.scale {
            ScaleMode::Auto => !bits.is_infinite(),
            ScaleMode::On => true,
            ScaleMode::Off => false,
        }
    }

    /// Applies a comma-separated override for `key` after checking it parses.
    pub fn override_list<T: FromStr>(kv: &mut KeyValues, key: &str, value: &str) -> Result<()> {
        parse_list::<T>(value).map_err(|_| Error::invalid(format!("cannot parse {key} = {value:?}")))?;
        kv.set(key, value);
        Ok(())
    }
}

/// `sigma_w^2 = sigma_x^2 / (R A 10^(EbN0/10))`.
pub fn noise_variance_from_ebn0(ebn0_db: f64, rate: f64, bits_per_symbol: usize, symbol_var: f64) -> f64 {
    symbol_var / (rate * bits_per_symbol as f64 * 10f64.powf(ebn0_db / 10.0))
}
