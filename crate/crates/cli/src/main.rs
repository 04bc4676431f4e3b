use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod config;
mod run;

use config::{ExperimentConfig, Overrides};
use run::Manifest;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Library(#[from] perptail::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Parser)]
#[command(name = "perptail", version, about = "Tail asymptotics of critical perpetuities and extremal recursions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the coefficient and noise laws and audit the hypotheses.
    Calibrate(Common),
    /// Sample the stationary law and write tail estimates.
    Simulate(Common),
    /// Compute a renewal function and run the renewal checks.
    Renewal(Common),
    /// Sample and run every check listed in the config.
    Check(Common),
    /// Print the outcome of a finished run in --out.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file; built-in defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "PERPTAIL_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated check tags.
    #[arg(long, value_delimiter = ',')]
    check: Option<Vec<String>>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = ExperimentConfig::load(self.config.as_deref())?;
        cfg.apply(&Overrides {
            seed: self.seed,
            samples: self.samples,
            workers: self.workers,
            out: self.out.clone(),
            checks: self.check.clone(),
        });
        Ok(cfg)
    }
}

fn print_manifest(m: &Manifest) {
    println!("{} {} (config {})", m.command, m.version, &m.config_hash[..12]);
    for c in &m.checks {
        println!("  {:<13} {}  {}", c.tag, if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
}

fn execute(cli: Cli) -> Result<Manifest, CliError> {
    match cli.command {
        Command::Calibrate(c) => run::calibrate(&c.resolve()?),
        Command::Simulate(c) => run::simulate(&c.resolve()?, false),
        Command::Renewal(c) => run::renewal(&c.resolve()?),
        Command::Check(c) => run::simulate(&c.resolve()?, true),
        Command::Report(c) => {
            let cfg = c.resolve()?;
            let (manifest, summary) = run::load_manifest(&cfg.out)?;
            print!("{summary}");
            Ok(manifest)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(m) => {
            print_manifest(&m);
            if m.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("perptail: {e}");
            ExitCode::from(2)
        }
    }
}
