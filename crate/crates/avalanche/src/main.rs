use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use avalanche::config::{load_config, ExperimentKind};
use avalanche::runner::run_experiment;

#[derive(Parser)]
#[command(name = "avalanche", version, about = "Bosonic avalanche-chain simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing)
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the master seed from the config
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Also write SVG plots
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the mean-field equations and record the trace
    Meanfield(CommonArgs),
    /// Classify the dynamical phase on a (gamma_g, kappa_c) grid
    PhaseDiagram(CommonArgs),
    /// Scan pulse periods over a parameter grid and report the collapse spread
    PeriodScan(CommonArgs),
    /// Sample stochastic trajectories
    Trajectories(CommonArgs),
    /// Emission spectrum from an ensemble of trajectories
    Spectrum(CommonArgs),
    /// Coherence parameter beta versus pump strength
    BetaScan(CommonArgs),
    /// Single-excitation detector counting statistics
    Detector(CommonArgs),
    /// Circuit design report from hardware parameters
    Circuit(CommonArgs),
}

impl Command {
    fn split(&self) -> (ExperimentKind, &CommonArgs) {
        match self {
            Command::Meanfield(a) => (ExperimentKind::Meanfield, a),
            Command::PhaseDiagram(a) => (ExperimentKind::PhaseDiagram, a),
            Command::PeriodScan(a) => (ExperimentKind::PeriodScan, a),
            Command::Trajectories(a) => (ExperimentKind::Trajectories, a),
            Command::Spectrum(a) => (ExperimentKind::Spectrum, a),
            Command::BetaScan(a) => (ExperimentKind::BetaScan, a),
            Command::Detector(a) => (ExperimentKind::Detector, a),
            Command::Circuit(a) => (ExperimentKind::Circuit, a),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();

    if let Some(threads) = args.threads {
        if let Err(err) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: failed to set thread count: {err}");
            return ExitCode::FAILURE;
        }
    }

    let mut config = match load_config(&args.config) {
        Ok(c) => c,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::FAILURE;
        }
    };
    if config.experiment != kind {
        eprintln!(
            "error: config declares experiment '{}' but subcommand is '{}'",
            config.experiment.name(),
            kind.name()
        );
        return ExitCode::FAILURE;
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }

    match run_experiment(&config, &args.out, args.plot) {
        Ok(outcome) => {
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
