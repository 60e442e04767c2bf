//! Command-line experiment runner. Exit codes: 0 success, 1 configuration
//! or validation failure, 2 numerical failure (module error printed
//! verbatim).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use transmission1d::runner::{self, RunContext};
use transmission1d::Error;

#[derive(Parser)]
#[command(
    name = "transmission1d",
    about = "Experiments on 1D elliptic transmission problems",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Path to the TOML experiment configuration.
    #[arg(long, global = true, default_value = "experiment.toml")]
    config: PathBuf,
    /// Override every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `[output] dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread count for sample-parallel estimators.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// One transmission solve; writes the solution and conormal traces.
    Solve,
    /// Discrete Poincare constant over the mesh schedule.
    Poincare,
    /// Discrete operator-inverse norm over the mesh schedule.
    InverseNorm,
    /// Projection-error convergence rates against a fine reference.
    Convergence,
    /// Monte Carlo coefficient-moment estimate for a log-normal model.
    McMoments,
    /// Monte Carlo FEM projection-error moments over the mesh schedule.
    McFemError,
    /// Regularity-shift and inverse-norm envelope reports over a random corpus.
    Bounds,
    /// Sign-changing resolvent norms, contrast sweep, and regularity probes.
    SignChanging,
}

impl Command {
    fn to_runner(self) -> runner::Subcommand {
        match self {
            Command::Solve => runner::Subcommand::Solve,
            Command::Poincare => runner::Subcommand::Poincare,
            Command::InverseNorm => runner::Subcommand::InverseNorm,
            Command::Convergence => runner::Subcommand::Convergence,
            Command::McMoments => runner::Subcommand::McMoments,
            Command::McFemError => runner::Subcommand::McFemError,
            Command::Bounds => runner::Subcommand::Bounds,
            Command::SignChanging => runner::Subcommand::SignChanging,
        }
    }
}

fn execute(cli: &Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    }
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| Error::Validation(format!("cannot read {}: {e}", cli.config.display())))?;
    let ctx = RunContext::new(&text, cli.seed, cli.out.as_deref())?;
    let summary = runner::run(cli.command.to_runner(), &ctx)?;
    for path in &summary.outputs {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Validation(_) | Error::NotInVk(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
