use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use phasedyn_cli::commands::{cmd_marginals, cmd_oracle, cmd_run, cmd_sweep};
use phasedyn_cli::selftest::{report, run_selftest, SelftestOptions};
use phasedyn_cli::Overrides;

#[derive(Parser)]
#[command(name = "phasedyn", version, about = "Nonadiabatic trajectory ensembles on constraint phase space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML configuration file
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the worker count
    #[arg(long)]
    workers: Option<usize>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, workers: self.workers, out: self.out.clone() }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one ensemble; writes series.csv, meta.txt and channels.csv if requested
    Run(Common),
    /// Run the ensemble once per value of a config parameter
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted parameter path, e.g. model.p0
        #[arg(long)]
        param: String,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<String>,
    },
    /// Run an exact reference propagation
    Oracle(Common),
    /// Compute a marginal or hybrid grid
    Marginals(Common),
    /// Run the fast invariant checks
    Selftest {
        /// Monte Carlo samples per moment check
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Use this gamma in place of the self-inverse value (negative control)
        #[arg(long)]
        gamma_override: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => cmd_run(&c.config, &c.overrides()).map(|p| format!("wrote {}", p.display())),
        Command::Sweep { common, param, values } => {
            cmd_sweep(&common.config, param, values, &common.overrides()).map(|p| format!("wrote {}", p.display()))
        }
        Command::Oracle(c) => cmd_oracle(&c.config, &c.overrides()).map(|p| format!("wrote {}", p.display())),
        Command::Marginals(c) => cmd_marginals(&c.config, &c.overrides()).map(|p| format!("wrote {}", p.display())),
        Command::Selftest { samples, seed, gamma_override } => {
            let checks =
                run_selftest(&SelftestOptions { samples: *samples, seed: *seed, gamma_override: *gamma_override });
            print!("{}", report(&checks));
            if checks.iter().all(|c| c.passed) {
                return ExitCode::SUCCESS;
            }
            return ExitCode::FAILURE;
        }
    };
    match result {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
