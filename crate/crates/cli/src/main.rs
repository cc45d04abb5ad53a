//! `graft`: synthesize, prepare, train, forecast, evaluate and attribute.
//!
//! Every command writes into a fresh `{out}/{command}-{NNN}` directory with a
//! `manifest.json` of input and output digests, and prints that directory.
//! Exit status is 0 on success, 2 for invalid input or settings, 1 for any
//! other failure.

mod commands;
mod config;
mod prepared;
mod rundir;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use graft_core::GraftError;

use commands::Ctx;
use config::{Invalid, Settings};

#[derive(Parser)]
#[command(name = "graft", version, about = "Text-fused load forecasting on sparse Hopfield attention")]
struct Cli {
    /// Settings file of `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// 0 (load only), 1 (News), 2 (Reddit), 3 (Policy) or 123 (all).
    #[arg(long, global = true)]
    source_switch: Option<String>,
    /// vstlf, stlf, mtlf or wN for N half-hours.
    #[arg(long, global = true)]
    horizon: Option<String>,
    /// Base directory for run directories [default: runs].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic region with text-announced demand shocks.
    Synth,
    /// Ingest load, embeddings and covariates; build memories and splits.
    Prepare {
        #[arg(long)]
        load: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        covariates: Option<PathBuf>,
    },
    /// Train a model on a prepared dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
    },
    /// Rolling forecasts of a trained model.
    Forecast {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Skill, RankRMSE and Wins across sources.
    Eval {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Forecast run directory or `NAME=PATH`; repeat per source.
        #[arg(long = "predictions", num_args = 1..)]
        predictions: Vec<String>,
        /// Precomputed `task,source,rmse` table with the baseline as source `stat`.
        #[arg(long, conflicts_with_all = ["data", "predictions"])]
        rmse_table: Option<PathBuf>,
    },
    /// Export source and slot attribution weights.
    Attr {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Energy descent, sparse-vs-dense retrieval and capacity checks.
    HopfieldBench {
        #[arg(long, default_value_t = 500)]
        runs: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        dims: Vec<usize>,
        #[arg(long, default_value_t = 2048)]
        max_patterns: usize,
    },
}

fn settings(cli: &Cli) -> Result<Settings> {
    let mut s = Settings::load(cli.config.as_deref())?;
    if let Some(v) = cli.seed {
        s.set("seed", v);
    }
    if let Some(v) = &cli.source_switch {
        s.set("source_switch", v);
    }
    if let Some(v) = &cli.horizon {
        s.set("horizon", v);
    }
    if let Some(v) = &cli.out {
        s.set("out", v.display());
    }
    s.switch()?;
    s.horizon()?;
    Ok(s)
}

fn run(cli: Cli) -> Result<PathBuf> {
    let settings = settings(&cli)?;
    let out = PathBuf::from(settings.raw("out").unwrap_or("runs"));
    let ctx = Ctx { settings, out };
    match cli.command {
        Command::Synth => commands::synth::run(&ctx),
        Command::Prepare { load, embeddings, covariates } => {
            commands::prepare::run(&ctx, commands::prepare::Args { load, embeddings, covariates })
        }
        Command::Train { data } => commands::train::run(&ctx, &data),
        Command::Forecast { data, run, split } => commands::forecast::run(&ctx, &data, &run, &split),
        Command::Eval { data, predictions, rmse_table } => {
            commands::eval::run(&ctx, commands::eval::Args { data, predictions, rmse_table })
        }
        Command::Attr { data, run, split } => commands::attr::run(&ctx, &data, &run, &split),
        Command::HopfieldBench { runs, trials, dims, max_patterns } => {
            commands::hopfield::run(&ctx, commands::hopfield::Args { runs, trials, dims, max_patterns })
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let validation = e.chain().any(|c| {
        c.is::<Invalid>()
            || matches!(
                c.downcast_ref::<GraftError>(),
                Some(GraftError::Schema { .. } | GraftError::Config(_) | GraftError::Input(_) | GraftError::Dimension(_))
            )
    });
    if validation {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
