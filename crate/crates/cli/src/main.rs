mod commands;
mod config;
mod runs;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{ArgAction, Args, Parser, Subcommand};

use config::{parse_families, Command, RunConfig};

#[derive(Parser)]
#[command(
    name = "cvstab",
    version,
    about = "Stability certificates and simulation for complex-valued delayed networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Comparison matrices, M-matrix verdicts and eigenvalues.
    Check(Common),
    /// Search weights and rates for each criterion family.
    Certify(Common),
    /// Simulate every initial case in the input and export CSV trajectories.
    Simulate(Common),
    /// Run the bundled two-neuron experiments and compare with the reference values.
    ReproducePaper(Common),
}

#[derive(Args)]
struct Common {
    /// Network definition (JSON).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integrator step.
    #[arg(long, default_value_t = 1e-3)]
    h: f64,
    /// Simulation horizon.
    #[arg(long = "t-end", default_value_t = 40.0)]
    t_end: f64,
    /// Write every k-th sample to CSV.
    #[arg(long, default_value_t = 10)]
    stride: usize,
    /// Comma-separated families (T1T2, ..., T17T18, MMatrix) or `all`.
    #[arg(long, value_delimiter = ',')]
    families: Option<Vec<String>>,
    /// Use the 2-norm expressions exactly as printed (`false` switches to the λ-consistent form).
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    strict_paper_formulas: bool,
    /// Tune the 2-norm parameters π, ω before certifying.
    #[arg(long)]
    refine_two_norm: bool,
}

fn config(command: Command, a: Common) -> Result<RunConfig> {
    let cfg = RunConfig {
        command,
        input: a.input,
        out: a.out,
        h: a.h,
        t_end: a.t_end,
        stride: a.stride,
        families: parse_families(a.families.as_deref())?,
        strict_paper_formulas: a.strict_paper_formulas,
        refine_two_norm: a.refine_two_norm,
        cases: Vec::new(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    let (command, args) = match cli.command {
        Cmd::Check(a) => (Command::Check, a),
        Cmd::Certify(a) => (Command::Certify, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::ReproducePaper(a) => (Command::ReproducePaper, a),
    };
    let cfg = config(command, args)?;
    match cfg.command {
        Command::Check => commands::check(&cfg),
        Command::Certify => commands::certify(&cfg),
        Command::Simulate => commands::simulate(&cfg),
        Command::ReproducePaper => commands::reproduce_paper(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
