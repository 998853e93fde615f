//! Monte-Carlo driver: scenario configuration, the paired-seed sweep over
//! receivers, bit depths and Eb/N0, and result summaries.

mod config;
mod summarize;
mod sweep;

pub use config::{
    noise_variance_from_ebn0, ChannelSource, CodeSource, PowerMode, Receiver, ScaleMode, ScenarioConfig,
};
pub use summarize::{parse_results, summary_table, write_gnuplot};
pub use sweep::{
    channel_nmse, iteration_trace_csv, results_csv, run_sweep, IterationTraceRow, ResultRow, SweepOutput,
    CSV_HEADER,
};
