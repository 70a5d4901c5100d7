use clap::{Parser, Subcommand};
use ising_cli::{commands, config, CliError, RunConfig};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "ising", version, about = "Ground states, sweeps and nonlocal perimeter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for random instances (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Minimal minimizer of the periodic problem on one slab.
    Solve,
    /// Unconstrained search with doubling, monotonicity, density, clean-ball and growth checks.
    Pipeline,
    /// Interface width against τ for the block-defect coupling.
    #[command(name = "appendixB", alias = "appendix-b")]
    AppendixB,
    /// Discrete perimeter against a fine reference over an ε schedule.
    Gamma,
    /// Seeded invariant suite; exit 4 on any failure.
    Verify,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => return Err(CliError::Config("--config PATH is required".into())),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    config::validate(&cfg)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let report = match cli.command {
        Command::Solve => commands::solve(&cfg, &out)?,
        Command::Pipeline => commands::pipeline(&cfg, &out)?,
        Command::AppendixB => commands::appendix_b(&cfg, &out)?,
        Command::Gamma => commands::gamma(&cfg, &out)?,
        Command::Verify => commands::verify(&cfg, &out)?,
    };
    println!("{report}");
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
