//! Command-line harness: BER sweeps, training, adaptive decoding
//! simulations, op-count reports and code generation.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Config;

#[derive(Debug, Parser)]
#[command(
    name = "mram-ecc",
    version,
    about = "Unfolded ECC decoders for STT-MRAM read channels"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Experiment configuration file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Root RNG seed; overrides MRAM_ECC_SEED and the config file.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output file (directory for `train`); stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Worker threads for Monte Carlo and batch gradients.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// BER of each decoder over a spread sweep.
    BerSweep,
    /// Train a neural decoder and write its weights and epoch log.
    Train(TrainArgs),
    /// Adaptive decoding cost and success per scenario.
    AdaptiveSim(AdaptiveArgs),
    /// Measured op counts against the closed-form table.
    CostReport(CostArgs),
    /// Write a code's parity-check matrix in alist format.
    GenCode(GenCodeArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub samples_train: Option<usize>,
    #[arg(long)]
    pub samples_val: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub spread: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AdaptiveArgs {
    /// Cost check with one read entering and succeeding at each level.
    #[arg(long)]
    pub forced: bool,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    #[arg(long)]
    pub code: Option<String>,
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenCodeArgs {
    /// Code name such as hamming_7_4 or hamming_71_64.
    #[arg(long, conflicts_with = "hamming")]
    pub code: Option<String>,
    /// Full Hamming code with this many parity bits.
    #[arg(long)]
    pub hamming: Option<u32>,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

pub type Outcome<T> = Result<T, Failure>;

/// Tags an error with its failure class.
pub trait Classify<T> {
    fn config(self) -> Outcome<T>;
    fn runtime(self) -> Outcome<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Outcome<T> {
        self.map_err(|e| Failure::Config(e.into()))
    }

    fn runtime(self) -> Outcome<T> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn configure_threads(threads: Option<usize>) -> Outcome<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Failure::Config(anyhow::anyhow!(
            "--threads must be at least 1"
        )));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .runtime()?;
    #[cfg(not(feature = "parallel"))]
    eprintln!("built without parallel support; --threads {n} ignored");
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome<()> {
    configure_threads(cli.global.threads)?;
    let cfg = Config::load(cli.global.config.as_deref()).config()?;
    let seed = cfg.seed(cli.global.seed).config()?;
    let out = cli.global.out.as_deref();
    match cli.command {
        Command::BerSweep => commands::ber_sweep(&cfg, seed, out),
        Command::Train(a) => commands::train(&cfg, seed, out, &a),
        Command::AdaptiveSim(a) => commands::adaptive_sim(&cfg, seed, out, &a),
        Command::CostReport(a) => commands::cost_report(&cfg, seed, out, &a),
        Command::GenCode(a) => commands::gen_code(out, &a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (label, err) = match &f {
                Failure::Config(e) => ("config error", e),
                Failure::Runtime(e) => ("error", e),
            };
            eprintln!("{label}: {err:#}");
            ExitCode::from(f.exit_code())
        }
    }
}
