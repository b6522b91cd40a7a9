//! Experiment driver for multimodal fusion stability studies: generates
//! synthetic datasets, trains autoencoders across fusion strategies,
//! computes theoretical Lipschitz bounds, estimates empirical constants,
//! sweeps the attention regularization weight, and runs latent-space fault
//! detection. All randomness is seeded through the configuration, so every
//! command is reproducible byte for byte.

mod config;
mod experiment;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;
use experiment::Warnings;

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "fuselab",
    version,
    about = "Multimodal fusion stability experiments",
    long_about = "Runs the synthetic multimodal fusion pipeline. All parameters live in a \
                  TOML config (see --config); every field has a default, and the resolved \
                  configuration is written next to the results as effective_config.toml. \
                  Output columns are documented in schema.txt inside the output directory. \
                  Exit codes: 0 success, 1 runtime failure, 2 configuration error."
)]
struct Cli {
    /// TOML configuration file; omitted means all defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory all results are written into.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Replace every section seed in the config with this value.
    #[arg(long, global = true)]
    seed_override: Option<u64>,

    /// Turn warnings (divergence, rank deficiency) into a failing exit.
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset and write it as CSV plus manifest.
    GenData,
    /// Train autoencoders for each configured fusion kind across trials;
    /// writes per-trial logs, model snapshots, and a summary CSV.
    Train,
    /// Compute theoretical Lipschitz bounds and measured norm inputs for a
    /// trained snapshot; writes bounds.csv.
    Bounds {
        /// Model snapshot produced by the train command.
        snapshot: PathBuf,
    },
    /// Sample empirical function/gradient Lipschitz estimates per submodel
    /// of a snapshot; writes estimates.csv.
    Estimate {
        /// Model snapshot produced by the train command; not needed with
        /// --self-test.
        snapshot: Option<PathBuf>,
        /// Run the built-in quadratic oracle check instead of a snapshot.
        #[arg(long)]
        self_test: bool,
    },
    /// Train attention models across the configured lambda grid; writes
    /// ablation.csv with final losses, Lipschitz estimates, and norms.
    Ablate,
    /// Fit the latent-space fault detector on fresh clean data and score a
    /// fault-injected evaluation set; writes report CSV and summary.
    Detect {
        /// Model snapshot produced by the train command.
        snapshot: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let mut config = match ExperimentConfig::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(seed) = cli.seed_override {
        config.override_seeds(seed);
    }

    if let Err(e) = std::fs::create_dir_all(&cli.out) {
        eprintln!("error: cannot create output directory {}: {e}", cli.out.display());
        return ExitCode::from(EXIT_RUNTIME);
    }

    let mut warnings = Warnings::default();
    let result = match &cli.command {
        Command::GenData => experiment::run_gen_data(&config, &cli.out),
        Command::Train => experiment::run_train(&config, &cli.out, &mut warnings),
        Command::Bounds { snapshot } => experiment::run_bounds(snapshot, &config, &cli.out),
        Command::Estimate { snapshot, self_test } => {
            if *self_test {
                experiment::run_self_test()
            } else {
                match snapshot {
                    Some(path) => experiment::run_estimate(path, &config, &cli.out),
                    None => {
                        eprintln!("estimate needs a snapshot path or --self-test");
                        return ExitCode::from(EXIT_CONFIG);
                    }
                }
            }
        }
        Command::Ablate => experiment::run_ablate(&config, &cli.out, &mut warnings),
        Command::Detect { snapshot } => {
            experiment::run_detect(snapshot, &config, &cli.out, &mut warnings)
        }
    };

    match result {
        Ok(()) => {
            if cli.strict && !warnings.0.is_empty() {
                eprintln!("failing on {} warning(s) because of --strict", warnings.0.len());
                ExitCode::from(EXIT_RUNTIME)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
