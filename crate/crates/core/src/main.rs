use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fewbit::channel::generate_channel;
use fewbit::coding::LdpcCode;
use fewbit::frame::Frame;
use fewbit::harness::{
    iteration_trace_csv, parse_results, results_csv, run_sweep, summary_table, write_gnuplot, ChannelSource,
    ScenarioConfig,
};
use fewbit::kv::KeyValues;
use fewbit::quantizer::{stepsize_table_csv, Bits};
use fewbit::{Error, Result};

#[derive(Parser)]
#[command(name = "fewbit", version, about = "Few-bit ADC turbo receiver experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo BER/NMSE sweep over receivers, bit depths and Eb/N0.
    Sweep(SweepArgs),
    /// Print a result CSV as a table, optionally writing gnuplot data files.
    Summarize {
        csv: PathBuf,
        #[arg(long)]
        gnuplot: Option<PathBuf>,
    },
    /// MMSE quantizer stepsizes for a unit-variance Gaussian input.
    Stepsizes {
        #[arg(long, default_value_t = 8)]
        max_bits: u32,
    },
    /// Write a generated rate-1/2 LDPC code in alist format.
    ExportCode {
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the pilot/guard skeleton of the configured frame as CSV.
    Frame {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw one channel from the configured generator and write it as CSV.
    Channel {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct SweepArgs {
    /// Scenario file of `key = value` lines; desk-scale defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Result CSV (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-turbo-iteration trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (all cores if absent).
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated: pbigamp, pbigamp-bussgang, lmmse, lmmse-fast, pcsi.
    #[arg(long)]
    receivers: Option<String>,
    /// Comma-separated bit depths; `inf` for no quantization.
    #[arg(long)]
    bits: Option<String>,
    /// Comma-separated Eb/N0 grid in dB.
    #[arg(long, allow_hyphen_values = true)]
    ebn0: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated assumed-minus-true noise variance offsets in dB.
    #[arg(long, allow_hyphen_values = true)]
    mismatch_db: Option<String>,
    /// Add the perfect-channel-knowledge receiver.
    #[arg(long)]
    pcsi: bool,
    /// Channel taps (`l,re,im` CSV) used for every trial.
    #[arg(long)]
    channel_file: Option<PathBuf>,
}

fn load_kv(config: Option<&Path>) -> Result<(KeyValues, PathBuf)> {
    match config {
        Some(path) => Ok((
            KeyValues::load(path)?,
            path.parent().map(Path::to_path_buf).unwrap_or_default(),
        )),
        None => Ok((KeyValues::default(), PathBuf::from("."))),
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sweep(args: SweepArgs) -> Result<()> {
    let (mut kv, base) = load_kv(args.config.as_deref())?;
    if let Some(s) = args.seed {
        kv.set("seed", s.to_string());
    }
    if let Some(t) = args.trials {
        kv.set("trials", t.to_string());
    }
    if let Some(v) = &args.receivers {
        ScenarioConfig::override_list::<fewbit::harness::Receiver>(&mut kv, "receivers", v)?;
    }
    if let Some(v) = &args.bits {
        ScenarioConfig::override_list::<Bits>(&mut kv, "bits", v)?;
    }
    if let Some(v) = &args.ebn0 {
        ScenarioConfig::override_list::<f64>(&mut kv, "ebn0_db", v)?;
    }
    if let Some(v) = &args.mismatch_db {
        ScenarioConfig::override_list::<f64>(&mut kv, "mismatch_db", v)?;
    }
    let mut cfg = ScenarioConfig::from_kv(&kv, &base)?;
    if let Some(path) = args.channel_file {
        cfg.channel = ChannelSource::File(path);
    }
    if args.pcsi && !cfg.receivers.contains(&fewbit::harness::Receiver::Pcsi) {
        cfg.receivers.push(fewbit::harness::Receiver::Pcsi);
    }
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    log::info!(
        "sweep: {} receivers x {} bit depths x {} Eb/N0 points x {} trials on {workers} workers",
        cfg.receivers.len(),
        cfg.bits.len(),
        cfg.ebn0_db.len(),
        cfg.trials
    );
    let out = run_sweep(&cfg, workers)?;
    write_or_print(args.out.as_deref(), &results_csv(&out.rows))?;
    if let Some(path) = args.trace {
        write_or_print(Some(&path), &iteration_trace_csv(&out.trace))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep(args) => sweep(args),
        Command::Summarize { csv, gnuplot } => {
            let text = std::fs::read_to_string(&csv).map_err(|e| Error::Io { path: csv, source: e })?;
            let rows = parse_results(&text)?;
            print!("{}", summary_table(&rows));
            if let Some(dir) = gnuplot {
                let names = write_gnuplot(&rows, &dir)?;
                eprintln!("wrote {} curves to {}", names.len(), dir.display());
            }
            Ok(())
        }
        Command::Stepsizes { max_bits } => {
            print!("{}", stepsize_table_csv(max_bits)?);
            Ok(())
        }
        Command::ExportCode { length, seed, out } => LdpcCode::generate(length, length / 2, seed)?.save_alist(&out),
        Command::Frame { config, out } => {
            let (kv, base) = load_kv(config.as_deref())?;
            let cfg = ScenarioConfig::from_kv(&kv, &base)?;
            write_or_print(out.as_deref(), &Frame::skeleton(&cfg.frame)?.to_csv())
        }
        Command::Channel { config, seed, out } => {
            let (kv, base) = load_kv(config.as_deref())?;
            let cfg = ScenarioConfig::from_kv(&kv, &base)?;
            let ChannelSource::Generate(g) = &cfg.channel else {
                return Err(Error::InvalidArgument("configuration names a channel file; nothing to draw".into()));
            };
            let h = generate_channel(g, &mut ChaCha8Rng::seed_from_u64(seed))?;
            write_or_print(out.as_deref(), &h.to_csv())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
