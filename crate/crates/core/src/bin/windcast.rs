//! Batch driver for the forecasting and decision pipeline.
//!
//! ```bash
//! windcast pipeline --config run.toml --out out/
//! windcast forecast --config run.toml --emit-plots-data
//! windcast pipeline --config run.toml --from trade
//! ```
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
//! Failures print one line `error[<class>]: <message>` to stderr.
//! `WINDCAST_THREADS` caps the worker threads.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use windcast::config::RunConfig;
use windcast::pipeline::{run_pipeline, run_stage, RunOptions, Stage};
use windcast::{Error, Result};

#[derive(Parser)]
#[command(name = "windcast", version)]
#[command(about = "Wind power forecasting, scenario generation and decision pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; built-in defaults when omitted
    #[arg(long)]
    config: Option<PathBuf>,

    /// Overrides the configured seed
    #[arg(long)]
    seed: Option<u64>,

    /// Overrides the configured output directory
    #[arg(long)]
    out: Option<PathBuf>,

    /// Also write fan-chart interval data (central 10%-90% intervals)
    #[arg(long)]
    emit_plots_data: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate power, wind fields and prices
    Simulate(Common),
    /// Fit point and probabilistic models on the training hours
    Fit(Common),
    /// Issue point and quantile forecasts at each test origin
    Forecast(Common),
    /// Sample space-time trajectories from the Gaussian copula
    Trajectories(Common),
    /// Day-ahead offers and their settlement
    Trade(Common),
    /// Up and down reserve requirements
    Reserve(Common),
    /// Scores, reliability and PIT
    Verify(Common),
    /// Run all stages in order
    Pipeline {
        #[command(flatten)]
        common: Common,

        /// First stage to run
        #[arg(long, default_value = "simulate")]
        from: Stage,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var("WINDCAST_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("WINDCAST_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let (stage, common, from) = match cli.command {
        Command::Simulate(c) => (Some(Stage::Simulate), c, None),
        Command::Fit(c) => (Some(Stage::Fit), c, None),
        Command::Forecast(c) => (Some(Stage::Forecast), c, None),
        Command::Trajectories(c) => (Some(Stage::Trajectories), c, None),
        Command::Trade(c) => (Some(Stage::Trade), c, None),
        Command::Reserve(c) => (Some(Stage::Reserve), c, None),
        Command::Verify(c) => (Some(Stage::Verify), c, None),
        Command::Pipeline { common, from } => (None, common, Some(from)),
    };
    let cfg = load_config(&common)?;
    let opts = RunOptions {
        emit_plots_data: common.emit_plots_data,
    };
    match (stage, from) {
        (Some(stage), _) => run_stage(stage, &cfg, &opts),
        (None, from) => run_pipeline(&cfg, from.unwrap_or(Stage::Simulate), &opts),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let class = e.class();
            let msg = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error[{}]: {msg}", class.as_str());
            ExitCode::from(class.exit_code() as u8)
        }
    }
}
