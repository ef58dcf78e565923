use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vibrokit::bundled::bundled_config;
use vibrokit::config::ExperimentConfig;
use vibrokit::experiment::{configure_threads, run, Command, RunOptions};

const EXIT_USAGE: u8 = 1;
const EXIT_NEGATIVE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "vibrokit", version, about = "Vibrational control of cluster synchronization in Kuramoto networks")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (JSON), or `bundled` for the shipped case study.
    #[arg(long)]
    config: String,
    /// Output directory (default: the config's `output.dir`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the config's schedule (default for `simulate`).
    #[arg(long, conflicts_with = "uncontrolled")]
    controlled: bool,
    /// Simulate with all vibration amplitudes set to zero.
    #[arg(long)]
    uncontrolled: bool,
    /// Reference phase for the transition matrix (rad).
    #[arg(long, allow_negative_numbers = true)]
    s0: Option<f64>,
    /// Vibration time scale epsilon (s).
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the invariance conditions of the partition.
    Validate(Common),
    /// Build the averaged stability certificate.
    Certify(Common),
    /// Integrate the network and judge cluster synchronization.
    Simulate(Common),
    /// Scan vibration amplitudes for the targeted clusters.
    Design(Common),
    /// Averaging-error study across halvings of epsilon.
    Sweep(Common),
}

fn load(path: &str) -> vibrokit::Result<ExperimentConfig> {
    if path == "bundled" {
        Ok(bundled_config())
    } else {
        ExperimentConfig::load(std::path::Path::new(path))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    let (command, common) = match cli.command {
        Cmd::Validate(c) => (Command::Validate, c),
        Cmd::Certify(c) => (Command::Certify, c),
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Design(c) => (Command::Design, c),
        Cmd::Sweep(c) => (Command::Sweep, c),
    };
    let cfg = match load(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let opts = RunOptions {
        out_dir: common.out,
        seed: common.seed,
        controlled: !common.uncontrolled,
        s0: common.s0,
        eps: common.eps,
    };
    match run(command, &cfg, &opts) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_NEGATIVE)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = if e.is_numerical() {
                EXIT_NUMERICAL
            } else if e.is_negative_verdict() {
                EXIT_NEGATIVE
            } else {
                EXIT_USAGE
            };
            ExitCode::from(code)
        }
    }
}
