use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aoi_core::experiment::{sweep, sweep_csv, write_sweep_csv, ExperimentConfig, ExperimentError, InstanceSpec, SweepAxis};
use aoi_core::{run_experiment, run_verification, HybridMn, PolicyKind, ProblemInstance};
use clap::{Parser, Subcommand};

const EXIT_CONFIG: u8 = 1;
const EXIT_ASSERTION: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "aoi-bandits", version, about = "Decentralized age-of-information bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `master_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the config once per axis value and write sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: SweepAxis,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact checks of the oracle, the i.i.d. optimum and the DLF bound.
    Verify {
        #[arg(long = "M", default_value_t = 2)]
        sources: usize,
        #[arg(long = "N", default_value_t = 4)]
        channels: usize,
        /// Comma-separated success probabilities.
        #[arg(long, value_delimiter = ',', default_values_t = [0.8, 0.75, 0.7, 0.65])]
        mu: Vec<f64>,
        /// Horizon for the regret bound.
        #[arg(long = "T", default_value_t = 20_000)]
        horizon: usize,
        /// Random doubly stochastic matrices tried against uniform weights.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory for schedules.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean pull table of the aware DLF and Thompson policies.
    Table {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        which: u8,
        #[arg(long, default_value_t = 200)]
        iterations: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Assertion(String),
    Io(String),
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Io { .. } => Failure::Io(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn output_dir(cli: Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    cli.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn write_and_report(result: &aoi_core::ExperimentResult, dir: &Path) -> Result<(), Failure> {
    result.write_csvs(dir)?;
    for p in &result.policies {
        println!(
            "{:<8} final regret {:>10.1} +- {:<8.1} collisions {:>8.1}",
            p.policy.name(),
            p.regret.final_mean(),
            p.regret.final_stderr(),
            p.collisions.0
        );
    }
    println!("wrote CSV files to {}", dir.display());
    Ok(())
}

fn table_config(which: u8, iterations: u64, seed: u64) -> ExperimentConfig {
    let instance = if which == 1 {
        InstanceSpec::explicit(2, 4, &[0.8, 0.75, 0.7, 0.65])
    } else {
        InstanceSpec::explicit(3, 5, &[0.8, 0.75, 0.7, 0.65, 0.6])
    };
    ExperimentConfig {
        instance,
        horizon: 20_000,
        iterations,
        policies: vec![PolicyKind::DlfAa, PolicyKind::DltsAa],
        master_seed: seed,
        hybrid_mn_interpretation: HybridMn::ProductMN,
        output_dir: None,
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, out, seed } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.master_seed = s;
            }
            let dir = output_dir(out, &cfg);
            write_and_report(&run_experiment(&cfg)?, &dir)
        }
        Command::Sweep {
            config,
            axis,
            values,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rows = sweep(&cfg, axis, &values)?;
            print!("{}", sweep_csv(&rows));
            let path = write_sweep_csv(&rows, &output_dir(out, &cfg))?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Verify {
            sources,
            channels,
            mu,
            horizon,
            samples,
            seed,
            out,
        } => {
            let instance = ProblemInstance::new(sources, channels, &mu).map_err(|e| Failure::Config(e.to_string()))?;
            let report = run_verification(&instance, horizon, samples, seed);
            print!("{}", report.render());
            if let Some(dir) = out {
                let path = dir.join("schedules.csv");
                std::fs::create_dir_all(&dir)
                    .and_then(|()| std::fs::write(&path, report.schedules_csv()))
                    .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
                println!("wrote {}", path.display());
            }
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Assertion("one or more checks failed".into()))
            }
        }
        Command::Table {
            which,
            iterations,
            seed,
            out,
        } => {
            let cfg = table_config(which, iterations, seed);
            let result = run_experiment(&cfg)?;
            print!("{}", result.pull_table_text());
            if let Some(dir) = out {
                result.write_csvs(&dir)?;
                println!("wrote CSV files to {}", dir.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Assertion(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(EXIT_ASSERTION)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("i/o error: {msg}");
            ExitCode::from(EXIT_IO)
        }
    }
}
