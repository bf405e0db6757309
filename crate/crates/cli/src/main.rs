#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod abg;
mod config;
mod data;
mod error;
mod manifest;
mod model;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use error::CliError;

#[derive(Parser)]
#[command(name = "sfdma", version, about = "Semantic feature division multiple access experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options of every command driven by an experiment config.
#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces `eval.trials`.
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    run: ConfigArgs,
    /// Defaults to `<out>/checkpoint.json`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct AbgArgs {
    /// `fit.json` from `fit-abg` (or a bare parameter object); overrides the
    /// individual parameters.
    #[arg(long)]
    abg: Option<PathBuf>,
    #[arg(long, default_value_t = 91.95)]
    alpha: f64,
    #[arg(long, default_value_t = 10.50)]
    beta: f64,
    #[arg(long, default_value_t = 81.90)]
    gamma: f64,
    #[arg(long, default_value_t = 1.329)]
    tau: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Train all users and write a checkpoint, metrics.csv and a manifest.
    Train(ConfigArgs),
    /// Per-user metric at the evaluation SNR.
    Eval(EvalArgs),
    /// Per-user metric over an SNR grid.
    Sweep {
        #[command(flatten)]
        eval: EvalArgs,
        #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
        snr_min: f64,
        #[arg(long, default_value_t = 25.0, allow_negative_numbers = true)]
        snr_max: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
    },
    /// Cross-decoding matrix: each receiver fed only another user's signal.
    Xdecode(EvalArgs),
    /// Normalized inner products and angles between users' blocks.
    Ortho(EvalArgs),
    /// 2-D PCA projection of the transmitted blocks.
    Project(EvalArgs),
    /// Fit the accuracy–SINR model to `sinr_db,accuracy_pct` rows or to
    /// sweep output.
    FitAbg {
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Only rows of this receiver (sweep output).
        #[arg(long)]
        user: Option<usize>,
    },
    /// Per-slot power that meets the accuracy target on a trace
    /// (`t,g_ii,interference_power,sigma2`).
    Power {
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Target accuracy in percent.
        #[arg(long)]
        eta: f64,
        #[command(flatten)]
        abg: AbgArgs,
    },
    /// Fixed versus adaptive power under fading; without a trace CSV a
    /// Rayleigh trace is drawn.
    Outage {
        input: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        eta: f64,
        #[arg(long, value_enum, default_value_t = abg::PolicyChoice::Both)]
        policy: abg::PolicyChoice,
        /// Quantile of the required power used by the fixed policy.
        #[arg(long, default_value_t = 0.95)]
        percentile: f64,
        /// Mean-power budget of the adaptive policy.
        #[arg(long)]
        budget: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Branches averaged into the own-link gain.
        #[arg(long, default_value_t = 64)]
        diversity: usize,
        /// Interferer powers of the synthetic trace.
        #[arg(long, value_delimiter = ',', default_value = "0.1")]
        interference: Vec<f64>,
        /// Noise variance of the synthetic trace.
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[command(flatten)]
        abg: AbgArgs,
    },
}

impl AbgArgs {
    fn params(&self) -> Result<sfdma_core::abg_power::AbgParams, CliError> {
        abg::params(self.abg.as_deref(), self.alpha, self.beta, self.gamma, self.tau)
    }
}

fn load(a: &ConfigArgs) -> Result<model::Run, CliError> {
    model::Run::load(&a.config, a.out.clone(), a.seed, a.trials)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => model::train(&load(&a)?),
        Command::Eval(e) => model::eval(&load(&e.run)?, e.checkpoint.as_deref()),
        Command::Sweep { eval, snr_min, snr_max, step } => {
            let grid = model::snr_grid(snr_min, snr_max, step)?;
            model::sweep(&load(&eval.run)?, eval.checkpoint.as_deref(), &grid)
        }
        Command::Xdecode(e) => model::xdecode(&load(&e.run)?, e.checkpoint.as_deref()),
        Command::Ortho(e) => model::ortho(&load(&e.run)?, e.checkpoint.as_deref()),
        Command::Project(e) => model::project(&load(&e.run)?, e.checkpoint.as_deref()),
        Command::FitAbg { input, out, user } => abg::fit(&input, &out, user),
        Command::Power { input, out, eta, abg } => abg::power(&input, &out, &abg.params()?, eta),
        Command::Outage {
            input,
            out,
            eta,
            policy,
            percentile,
            budget,
            trials,
            seed,
            diversity,
            interference,
            noise,
            abg,
        } => {
            let synth = abg::TraceSpec { trials, diversity, interference, noise, seed };
            let args = abg::OutageArgs { eta, policy, percentile, budget };
            abg::outage(input.as_deref(), &synth, &out, &abg.params()?, &args)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
