//! Command-line front end: train experiments, evaluate saved checkpoints,
//! sweep a config key across values, export metrics to CSV, and generate
//! scripted-oracle demonstrations.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime abort (including
//! non-finite losses).

mod commands;
mod config_file;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "l2t", version, about = "Teacher-student training lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one training experiment from a config file.
    Train {
        /// TOML config path.
        #[arg(long)]
        config: PathBuf,
        /// Config overrides, section.key=value; may repeat.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory for config echo, metrics, checkpoints, summary.
        #[arg(long, env = "L2T_OUT", default_value = "runs/latest")]
        out: PathBuf,
    },
    /// Evaluate saved checkpoints under the evaluation protocol.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Teacher checkpoint to evaluate (optional).
        #[arg(long)]
        teacher: Option<PathBuf>,
        /// Student checkpoint to evaluate (optional).
        #[arg(long)]
        student: Option<PathBuf>,
        /// Noise scale for the student view; defaults to the config's alpha.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = 5)]
        episodes: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Optional directory to write eval.json into.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train across a list of values for one config key and report the
    /// noise-monotonicity verdict (for env.alpha sweeps).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Dotted config key to sweep, e.g. env.alpha or student.loss_mode.
        #[arg(long)]
        param: String,
        /// Comma-separated values for the swept key.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        /// Seeds per value (seed, seed+1, ...).
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, env = "L2T_OUT", default_value = "runs/sweep")]
        out: PathBuf,
    },
    /// Convert a metrics log to long-format CSV (step,agent,metric,value).
    Export {
        /// metrics.jsonl produced by a training run.
        #[arg(long)]
        metrics: PathBuf,
        /// CSV output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Roll out the scripted controller and save demonstrations.
    GenDemos {
        /// Environment name (pendulum or pointmass).
        #[arg(long, default_value = "pendulum")]
        env: String,
        #[arg(long, default_value_t = 5)]
        episodes: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Demo file output path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train {
            config,
            overrides,
            out,
        } => commands::train(&config, &overrides, &out),
        Command::Eval {
            config,
            overrides,
            teacher,
            student,
            alpha,
            episodes,
            seed,
            out,
        } => commands::eval(
            &config,
            &overrides,
            teacher.as_deref(),
            student.as_deref(),
            alpha,
            episodes,
            seed,
            out.as_deref(),
        ),
        Command::Sweep {
            config,
            overrides,
            param,
            values,
            seeds,
            out,
        } => commands::sweep(&config, &overrides, &param, &values, seeds, &out),
        Command::Export { metrics, out } => commands::export(&metrics, &out),
        Command::GenDemos {
            env,
            episodes,
            seed,
            out,
        } => commands::gen_demos(&env, episodes, seed, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(err.exit_code())
        }
    }
}
