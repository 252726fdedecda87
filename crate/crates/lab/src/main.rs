use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maxwell_lab::commands;
use maxwell_lab::config::ExperimentConfig;
use maxwell_lab::error::{ConfigError, LabError};

#[derive(Parser)]
#[command(
    name = "maxwell-lab",
    version,
    about = "Approximation-factor experiments for the time-harmonic Maxwell cavity problem"
)]
struct Cli {
    /// TOML experiment configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps (all cores when omitted).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mesh statistics and DOF counts per level.
    MeshInfo {
        #[arg(long)]
        level: Option<usize>,
    },
    /// Smallest cavity eigenpairs on one mesh.
    Eigs {
        #[arg(long)]
        level: Option<usize>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long, default_value_t = 12)]
        count: usize,
    },
    /// Source problem with a random divergence-free right-hand side.
    Solve {
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        level: Option<usize>,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Regularity splitting of a source solution.
    Split {
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long, default_value_t = 1)]
        ell: usize,
        #[arg(long)]
        level: Option<usize>,
        #[arg(long)]
        order: Option<usize>,
    },
    /// One approximation-factor estimate.
    Gamma {
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long)]
        level: Option<usize>,
        #[arg(long)]
        order: Option<usize>,
    },
    /// All configured rows; writes sweep.csv, eigen.csv, timings.csv, sweep.log.
    Sweep,
    /// Bound fit, SVG plots and summary from a written sweep.
    Report,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.output = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.threads == Some(0) {
        return Err(ConfigError::Invalid("--threads must be positive".into()));
    }
    Ok(config)
}

fn run(cli: &Cli, config: &ExperimentConfig) -> Result<ExitCode, LabError> {
    let out = config.output.as_path();
    let s = &config.sweep;
    let level = |l: &Option<usize>| l.unwrap_or(s.levels[0]);
    let order = |p: &Option<usize>| p.unwrap_or(s.orders[0]);
    let omega = |w: &Option<f64>| w.unwrap_or(s.frequencies[0]);
    let text = match &cli.command {
        Command::MeshInfo { level } => {
            let levels = level.map_or_else(|| s.levels.clone(), |l| vec![l]);
            commands::mesh_info(config, &levels)?
        }
        Command::Eigs {
            level: l,
            order: p,
            count,
        } => commands::eigs(config, level(l), order(p), *count, out)?,
        Command::Solve {
            omega: w,
            level: l,
            order: p,
        } => commands::solve(config, omega(w), level(l), order(p), config.seed, out)?,
        Command::Split {
            omega: w,
            ell,
            level: l,
            order: p,
        } => commands::split(config, omega(w), *ell, level(l), order(p), config.seed, out)?,
        Command::Gamma {
            omega: w,
            level: l,
            order: p,
        } => {
            let (text, failed) = commands::gamma(config, omega(w), level(l), order(p));
            print!("{text}");
            return Ok(if failed {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            });
        }
        Command::Sweep => {
            let (text, failures) = commands::sweep(config, cli.threads, out)?;
            print!("{text}");
            return Ok(if failures > 0 {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            });
        }
        Command::Report => commands::report(config, out)?,
    };
    print!("{text}");
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load(&cli).and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cli, &config) {
        Ok(code) => code,
        Err(LabError::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
