use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use udcat::cli::{execute, CliError, Command, Experiment, ExperimentConfig, Overrides, Scale};

#[derive(Parser)]
#[command(name = "udcat", version, about = "Parity-adapted coherent states and the D-level LMG model")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Low-lying spectrum and parities over a lambda grid.
    Spectrum(Common),
    /// Fidelities of variational cats with numerical eigenstates.
    Fidelity(Common),
    /// Husimi function on a phase-space slice, with hump counts.
    Husimi(Common),
    /// Husimi moments (IPR) and Wehrl entropies.
    Localization(Common),
    /// Structural invariant suite; exits non-zero on any failure.
    Selftest(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Linear,
    Log,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Particle numbers, comma separated.
    #[arg(long = "N", value_delimiter = ',')]
    particles: Option<Vec<u32>>,
    /// Number of levels.
    #[arg(long = "D")]
    levels: Option<usize>,
    #[arg(long)]
    lambda_min: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    lambda_steps: Option<usize>,
    #[arg(long, value_enum)]
    lambda_scale: Option<ScaleArg>,
    /// Parity label such as [0,1] or 01; repeat for several.
    #[arg(long)]
    parity: Option<Vec<String>>,
    /// Monte Carlo samples per integral.
    #[arg(long)]
    samples: Option<usize>,
}

fn run(command: Command, args: Common) -> Result<bool, CliError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(c) = cfg.command {
        if c != command {
            log::warn!("config names command {c}, running {command}");
        }
    }
    cfg.apply(&Overrides {
        out: args.out,
        seed: args.seed,
        workers: args.workers,
        particles: args.particles,
        levels: args.levels,
        lambda_min: args.lambda_min,
        lambda_max: args.lambda_max,
        lambda_steps: args.lambda_steps,
        lambda_scale: args.lambda_scale.map(|s| match s {
            ScaleArg::Linear => Scale::Linear,
            ScaleArg::Log => Scale::Log,
        }),
        parity: args.parity,
        samples: args.samples,
    });
    let exp = Experiment::resolve(command, &cfg)?;
    let mut out: Box<dyn Write + Send> = match &exp.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout())),
    };
    let ok = execute(&exp, &mut out)?;
    out.flush()?;
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Spectrum(a) => (Command::Spectrum, a),
        Sub::Fidelity(a) => (Command::Fidelity, a),
        Sub::Husimi(a) => (Command::Husimi, a),
        Sub::Localization(a) => (Command::Localization, a),
        Sub::Selftest(a) => (Command::Selftest, a),
    };
    match run(command, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("udcat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
