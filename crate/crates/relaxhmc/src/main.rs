use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relaxhmc::config::{load_config, parse_config, Experiment, ExperimentConfig};
use relaxhmc::experiments::{default_hmc, resolve, run};
use relaxhmc::output::write_outputs;

const RUN_HELP: &str = "\
Output files (in --out, default out/<experiment>):
  samples.csv           one row per kept draw with columns
                        lambda,replicate,iteration,theta_1..theta_r,distance,accepted
                        (floats with 17 significant digits, accepted is 0 or 1;
                        header only for the quadrature rate experiments)
  summary.json          acceptance, ESS, violation and expectation-diff summaries,
                        oracle values and rate fits; every key is always present
  config_resolved.json  the full configuration, including the seed; pass it back
                        with --config to replay the run exactly
  network.json          synthetic network data (factor-network only)

Flags override values from --config. The seed defaults to RELAXHMC_SEED, then 0.";

#[derive(Parser)]
#[command(name = "relaxhmc", version, about = "Constraint-relaxed Hamiltonian Monte Carlo experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment.
    #[command(after_long_help = RUN_HELP)]
    Run(RunArgs),
    /// Parse and validate a JSON config without running it.
    Validate { file: PathBuf },
    /// Print the experiment catalog.
    List,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment name (see `relaxhmc list`).
    experiment: String,
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated, strictly decreasing relaxation scales.
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    /// Total HMC iterations per chain, warmup included.
    #[arg(long)]
    iterations: Option<usize>,
    /// Warmup iterations per chain.
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Sample size for the Gaussian mean experiments.
    #[arg(long)]
    n: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn env_seed() -> anyhow::Result<u64> {
    match std::env::var("RELAXHMC_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| anyhow::anyhow!("RELAXHMC_SEED must be a nonnegative integer, got '{s}'")),
        Err(_) => Ok(0),
    }
}

fn build_config(args: &RunArgs, experiment: Experiment) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::new(experiment),
    };
    cfg.experiment = experiment;
    if let Some(l) = &args.lambda {
        cfg.lambda_grid = Some(l.clone());
    }
    if let Some(n) = args.iterations {
        cfg.hmc.n_iterations = Some(n);
        if cfg.hmc.n_burnin.is_none() && args.burnin.is_none() {
            cfg.hmc.n_burnin = Some(default_hmc(experiment).n_burnin.min(n / 2));
        }
    }
    if let Some(b) = args.burnin {
        cfg.hmc.n_burnin = Some(b);
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if args.replicates.is_some() {
        cfg.replicates = args.replicates;
    }
    if args.n.is_some() {
        cfg.model.n = args.n;
    }
    if args.out.is_some() {
        cfg.output_dir = args.out.clone();
    }
    Ok(cfg)
}

fn run_command(args: &RunArgs) -> anyhow::Result<()> {
    let experiment = Experiment::parse(&args.experiment).expect("checked by caller");
    let cfg = build_config(args, experiment)?;
    let resolved = resolve(&cfg, env_seed()?)?;
    let outcome = run(&resolved)?;
    for w in &outcome.summary.warnings {
        eprintln!("warning: {w}");
    }
    write_outputs(&outcome)?;
    println!("{}: {} chain(s) written to {}", experiment, outcome.blocks.len(), resolved.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for e in Experiment::ALL {
                println!("{:<24}{}", e.name(), e.description());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { file } => {
            let src = match std::fs::read_to_string(&file) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", file.display());
                    return ExitCode::from(1);
                }
            };
            match parse_config(&src) {
                Ok(cfg) => {
                    println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
                    ExitCode::SUCCESS
                }
                Err(errs) => {
                    for e in &errs.0 {
                        eprintln!("{}: {e}", file.display());
                    }
                    ExitCode::from(if errs.unknown_experiment() { 2 } else { 1 })
                }
            }
        }
        Command::Run(args) => {
            if Experiment::parse(&args.experiment).is_none() {
                eprintln!("error: unknown experiment '{}'; run `relaxhmc list` for the catalog", args.experiment);
                return ExitCode::from(2);
            }
            match run_command(&args) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    let unknown = e
                        .chain()
                        .any(|c| c.downcast_ref::<relaxhmc::config::ConfigErrors>().is_some_and(|x| x.unknown_experiment()));
                    eprintln!("error: {e:#}");
                    ExitCode::from(if unknown { 2 } else { 1 })
                }
            }
        }
    }
}
