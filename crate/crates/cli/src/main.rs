use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use otaeq::experiment::{run_experiment, validate_config, ExperimentKind, ExperimentSpec, Profile};
use otaeq::ScenarioConfig;

/// Over-the-air RIS equalization experiments.
#[derive(Parser)]
#[command(name = "otaeq", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// ISI-elimination probability vs X for several N_b (and N_g under S2).
    IsiProb(RunArgs),
    /// ISI-elimination probability vs X for several RIS sizes.
    IsiProbVsM(RunArgs),
    /// Simulated and gamma-theory BER vs transmit power (ideal phases).
    Ber(RunArgs),
    /// BER with 1- and 2-bit phase quantization against ideal phases.
    DiscreteBer(RunArgs),
    /// Mean SINR vs M, ideal against blind reflection, uniform and exponential PDP.
    SinrSweep(RunArgs),
    /// Gamma fit of the SINR over N_b and transmit power.
    GammaFit(RunArgs),
    /// MGF-based PSK symbol error probability vs transmit power.
    Sep(RunArgs),
    /// Check a scenario file and list every violation.
    Validate {
        path: PathBuf,
    },
    /// Print the default scenario (simulation parameters of the reference setup) as TOML.
    DefaultConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Fast,
    Paper,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML file; defaults to the reference setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed, overriding the one in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "fast")]
    profile: ProfileArg,
    /// Override the profile's Monte Carlo trial count.
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads (default: all cores). Output does not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(kind: ExperimentKind, args: RunArgs) -> Result<()> {
    let mut base = match &args.config {
        Some(path) => validate_config(path).with_context(|| format!("loading {}", path.display()))?,
        None => ScenarioConfig::reference(),
    };
    if let Some(seed) = args.seed {
        base.seed = seed;
    }
    let profile = match args.profile {
        ProfileArg::Fast => Profile::Fast,
        ProfileArg::Paper => Profile::Paper,
    };
    let mut spec = ExperimentSpec::preset(kind, profile, base, &args.out);
    if let Some(t) = args.trials {
        spec.trials = t;
        spec.fit_samples = spec.fit_samples.min(t.max(otaeq::septheory::MIN_FIT_SAMPLES as u64));
    }
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let start = Instant::now();
    let path = run_experiment(&spec).with_context(|| format!("running {kind}"))?;
    log::info!("{kind} finished in {:.1?}", start.elapsed());
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Info)
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::IsiProb(a) => run(ExperimentKind::IsiProbSweep, a),
        Command::IsiProbVsM(a) => run(ExperimentKind::IsiProbVsM, a),
        Command::Ber(a) => run(ExperimentKind::BerCurve, a),
        Command::DiscreteBer(a) => run(ExperimentKind::DiscretePhaseBer, a),
        Command::SinrSweep(a) => run(ExperimentKind::SinrVsM, a),
        Command::GammaFit(a) => run(ExperimentKind::GammaTable, a),
        Command::Sep(a) => run(ExperimentKind::SepCurve, a),
        Command::Validate { path } => validate_config(&path)
            .map(|_| println!("{}: ok", path.display()))
            .with_context(|| format!("{} is not a valid scenario", path.display())),
        Command::DefaultConfig => {
            print!("{}", ScenarioConfig::reference().to_toml_string());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
