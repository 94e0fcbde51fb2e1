mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{Ctx, Outcome};

#[derive(Debug)]
pub enum CliError {
    Core(adslab::Error),
    Config(String),
    Io(String),
}

impl From<adslab::Error> for CliError {
    fn from(e: adslab::Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use adslab::Error::*;
        match self {
            CliError::Core(Numerical { .. }) => 3,
            CliError::Core(Budget(_)) => 4,
            CliError::Core(_) | CliError::Config(_) | CliError::Io(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(name = "adslab", version, about = "Lattice and continuum checks for scalar fields on hyperbolic half-space")]
struct Cli {
    /// TOML file of flat key = value overrides for the chosen command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the `seed` key of commands that sample.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for the JSON and CSV outputs.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    threads: u16,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Derived spectral parameters for (d, m²).
    Params,
    /// Tabulate G± in the chordal variable and check the boundary limits.
    KernelEval,
    /// G₋ − G₊ against the boundary bilinear term.
    SplittingCheck,
    /// Free-field limit of the subtracted equal-height form.
    CorrCheck,
    /// Small-z₀ exponents of E, σ and γ.
    ScalingFit,
    /// Monte Carlo ratio along a sequence of cutoffs.
    TrivialityRun,
    /// The two generating functionals and their duality.
    Functional,
    /// Finite-dimensional conditioning identity.
    ConditioningCheck,
    /// Convergence of the renormalized energy.
    RenormDemo,
    /// Tree-level contact four-point integral.
    Witten4,
    /// Stochastic and reflection positivity suites.
    Positivity,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Params => "params",
            Command::KernelEval => "kernel-eval",
            Command::SplittingCheck => "splitting-check",
            Command::CorrCheck => "corr-check",
            Command::ScalingFit => "scaling-fit",
            Command::TrivialityRun => "triviality-run",
            Command::Functional => "functional",
            Command::ConditioningCheck => "conditioning-check",
            Command::RenormDemo => "renorm-demo",
            Command::Witten4 => "witten4",
            Command::Positivity => "positivity",
        }
    }

    fn run(self, ctx: &Ctx) -> Result<Outcome, CliError> {
        match self {
            Command::Params => commands::params(ctx),
            Command::KernelEval => commands::kernel_eval(ctx),
            Command::SplittingCheck => commands::splitting_check(ctx),
            Command::CorrCheck => commands::corr_check(ctx),
            Command::ScalingFit => commands::scaling_fit(ctx),
            Command::TrivialityRun => commands::triviality(ctx),
            Command::Functional => commands::functional(ctx),
            Command::ConditioningCheck => commands::conditioning(ctx),
            Command::RenormDemo => commands::renorm(ctx),
            Command::Witten4 => commands::witten(ctx),
            Command::Positivity => commands::positivity(ctx),
        }
    }
}

fn write_outputs(out: &Path, name: &str, o: &Outcome) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(e.to_string());
    std::fs::create_dir_all(out).map_err(io)?;
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let doc = json!({
        "command": name,
        "timestamp": timestamp,
        "config": o.config,
        "result": o.result,
        "pass": o.pass,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(out.join(format!("{name}.json")), text + "\n").map_err(io)?;
    for (stem, body) in &o.csv {
        std::fs::write(out.join(format!("{stem}.csv")), body).map_err(io)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads as usize)
        .build_global()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let config_text = match &cli.config {
        Some(p) => Some(
            std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?,
        ),
        None => None,
    };
    let ctx = Ctx { config_text, seed: cli.seed };
    let outcome = cli.command.run(&ctx)?;
    write_outputs(&cli.out, cli.command.name(), &outcome)?;
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(o) => {
            for line in &o.summary {
                println!("{line}");
            }
            if o.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("{}: check outside tolerance", cli.command.name());
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
