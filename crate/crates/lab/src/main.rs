use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fpp_lab::{merge_dirs, ExperimentConfig, LabError};

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_CENSORED: u8 = 3;

#[derive(Parser)]
#[command(name = "fpp-lab", version, about = "Seeded first-passage percolation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its report directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, env = "FPP_LAB_THREADS", default_value_t = 0)]
        threads: usize,
        /// Exit with status 3 when the censored fraction exceeds
        /// thresholds.censor_limit.
        #[arg(long)]
        strict: bool,
    },
    /// Pool report directories of runs that differ only in master_seed.
    Merge {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn fail(e: LabError) -> ExitCode {
    eprintln!("fpp-lab: {e}");
    ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_FAILURE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
            strict,
        } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let report = match fpp_lab::run(&cfg, threads).and_then(|r| r.write(&out).map(|_| r)) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            let censored = report.censored_fraction();
            println!(
                "{}: {} replicas, censored fraction {censored:.4}, report in {}",
                cfg.experiment.name(),
                report.state.replicas(),
                out.display()
            );
            if strict && report.censored_beyond_limit() {
                eprintln!(
                    "fpp-lab: censored fraction {censored:.4} exceeds the limit {}",
                    cfg.thresholds.censor_limit
                );
                return ExitCode::from(EXIT_CENSORED);
            }
            ExitCode::SUCCESS
        }
        Command::Merge { dirs, out } => match merge_dirs(&dirs).and_then(|r| r.write(&out).map(|_| r)) {
            Ok(r) => {
                println!("merged {} reports ({} replicas) into {}", dirs.len(), r.state.replicas(), out.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(cfg) => {
                println!("{}: ok", cfg.experiment.name());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}
