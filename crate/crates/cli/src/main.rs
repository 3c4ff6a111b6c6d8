//! `strelcast` command-line interface.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "strelcast", version, about = "Spatio-temporal forecasting with STREL property monitoring")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Minutes per time step, for property windows given in minutes.
    #[arg(long, global = true, default_value_t = 10.0)]
    pub step_minutes: f64,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Aggregate raw activity records into a trace on a (sub)grid.
    Ingest(commands::IngestArgs),
    /// Average periodogram across locations, or its top peaks.
    Spectrum(commands::SpectrumArgs),
    /// Fit one model variant and write its draw archive.
    Fit(commands::FitArgs),
    /// Predictive trajectories from a draw archive, with optional LPDS.
    Predict(commands::PredictArgs),
    /// Verify properties on a trace or a predictive ensemble.
    Monitor(commands::MonitorArgs),
    /// Compare predicted and observed verification results.
    Assess(commands::AssessArgs),
    /// Cumulative log Bayes factors from LPDS tables.
    Compare(commands::CompareArgs),
    /// Rolling-window fit, forecast, monitoring and comparison.
    Pipeline(commands::PipelineArgs),
    /// Generate the synthetic 7x7 demonstration dataset.
    Synth(commands::SynthArgs),
}

/// Error raised for bad invocations; mapped to exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    use strelcast::Error as E;
    if err.downcast_ref::<UsageError>().is_some() {
        return 1;
    }
    match err.downcast_ref::<E>() {
        Some(E::InvalidArgument(_)) => 1,
        Some(E::Numerical { .. } | E::EmptyEnsemble) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let g = &cli.global;
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(g, a),
        Command::Spectrum(a) => commands::spectrum(g, a),
        Command::Fit(a) => commands::fit(g, a),
        Command::Predict(a) => commands::predict(g, a),
        Command::Monitor(a) => commands::monitor(g, a),
        Command::Assess(a) => commands::assess(g, a),
        Command::Compare(a) => commands::compare(g, a),
        Command::Pipeline(a) => commands::pipeline(g, a),
        Command::Synth(a) => commands::synth(g, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
