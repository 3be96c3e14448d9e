use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use evobag_cli::{execute, CliError, ExperimentConfig, Verb};

#[derive(Parser)]
#[command(name = "evobag", version, about = "Evolutionary bagging experiments")]
struct Cli {
    #[command(subcommand)]
    verb: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Repeated runs of every configured model.
    Run(Common),
    /// Bag-count sweep from sweep_from to sweep_to.
    SweepBags(Common),
    /// Across-ensemble diversity under bootstrap-resampled training sets.
    Variance(Common),
    /// Majority-class undersampling study (binary datasets).
    Imbalance(Common),
    /// Cross-validated grid search over G, M, MS and K.
    SweepHyper(Common),
}

#[derive(clap::Args)]
struct Common {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (falls back to out_dir in the config, then $EVOBAG_OUT_DIR, then ./results)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    reps: Option<usize>,
    /// Run a single model instead of the configured list
    #[arg(long)]
    model: Option<String>,
    /// Override a config key; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn resolve(common: &Common) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    for o in &common.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = common.reps {
        cfg.repetitions = reps;
    }
    if let Some(model) = &common.model {
        cfg.models = vec![model.parse().map_err(CliError::Config)?];
    }
    let out = common
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .or_else(|| std::env::var_os("EVOBAG_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    Ok((cfg, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (verb, common) = match &cli.verb {
        Command::Run(c) => (Verb::Run, c),
        Command::SweepBags(c) => (Verb::SweepBags, c),
        Command::Variance(c) => (Verb::Variance, c),
        Command::Imbalance(c) => (Verb::Imbalance, c),
        Command::SweepHyper(c) => (Verb::SweepHyper, c),
    };
    let result = resolve(common).and_then(|(cfg, out)| execute(verb, &cfg, &out));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("evobag: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
