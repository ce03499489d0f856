use clap::{Parser, Subcommand};
use negucb::{run_grid, write_run, write_sweep, ExperimentConfig, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "negucb", version, about = "Negotiation bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Added to every seed of the config.
    #[arg(long, global = true, default_value_t = 0)]
    seed_offset: u64,

    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Replications run concurrently (0 = one per core).
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run one parameter setting over every seed.
    Run { config: PathBuf },
    /// Run the cross product of the swept parameters.
    Sweep { config: PathBuf },
    /// Print bid-space sizes and sample bids.
    Enumerate {
        config: PathBuf,
        #[arg(long, default_value_t = 5)]
        samples: usize,
    },
    /// Check kernel predictions and bonuses against the explicit-feature estimator.
    OracleCheck {
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Relative change of the primal regularizers (fault injection).
        #[arg(long, default_value_t = 0.0)]
        lambda_perturbation: f64,
    },
}

fn load(path: &PathBuf) -> negucb::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| negucb::HarnessError::Io { path: path.clone(), source })?;
    ExperimentConfig::from_text(&text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let opts = RunOptions { seed_offset: cli.seed_offset, parallel: cli.parallel };
    let result = match &cli.command {
        Command::Run { config } => load(config)
            .and_then(|c| run_grid(&c, &opts))
            .and_then(|out| write_run(&out, &cli.out_dir))
            .map(|dir| println!("wrote {}", dir.display())),
        Command::Sweep { config } => load(config)
            .and_then(|c| run_grid(&c, &opts))
            .and_then(|out| write_sweep(&out, &cli.out_dir))
            .map(|dir| println!("wrote {}", dir.display())),
        Command::Enumerate { config, samples } => {
            load(config).and_then(|c| negucb::enumerate_report(&c, *samples)).map(|s| print!("{s}"))
        }
        Command::OracleCheck { seeds, lambda_perturbation } => {
            let seeds: Vec<u64> = (0..*seeds).map(|s| s + cli.seed_offset).collect();
            match negucb_core::oracle_check(&seeds, *lambda_perturbation) {
                Ok(r) => {
                    print!("{}", negucb::oracle_report_text(&r));
                    if !r.passed() {
                        return ExitCode::FAILURE;
                    }
                    Ok(())
                }
                Err(e) => Err(e.into()),
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
