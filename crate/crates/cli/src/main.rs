mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use crate::config::{parse_assignment, parse_config, ConfigFile};
use crate::output::{CliError, Output};

/// Environment variable that overrides the output directory.
pub const OUTPUT_DIR_ENV: &str = "CQNLS_OUTPUT_DIR";
const DEFAULT_OUTPUT_DIR: &str = "cqnls-out";

#[derive(Parser, Debug)]
#[command(
    name = "cqnls",
    version,
    about = "Ground states and dynamics of the 2D cubic-quintic NLS"
)]
struct Cli {
    /// Config file (flat key=value or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one key of the command's section, e.g. `--set omega=0.12`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; takes precedence over the environment and config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for one ground state.
    Solve(SolveArgs),
    /// Tabulate the ground-state branch over a frequency grid.
    Scan(ScanArgs),
    /// Find the frequency whose ground state has a given mass.
    Invert(InvertArgs),
    /// Minimize the energy at fixed mass.
    Minimize(MinimizeArgs),
    /// Run a time-dependent experiment.
    Simulate(SimulateArgs),
    /// Run the identity suite and emit a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long, allow_negative_numbers = true)]
    omega: Option<f64>,
    /// Solve the one-dimensional problem and compare with its closed form.
    #[arg(long)]
    one_d: bool,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    spacing: Option<String>,
}

#[derive(Args, Debug)]
struct InvertArgs {
    #[arg(long, allow_negative_numbers = true)]
    mass: Option<f64>,
}

#[derive(Args, Debug)]
struct MinimizeArgs {
    #[arg(long, allow_negative_numbers = true)]
    mass: Option<f64>,
    #[arg(long)]
    mass_factor: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// stability, boost, scattering or fidelity.
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Ten-point branch and reduced trial counts.
    #[arg(long)]
    quick: bool,
    #[arg(long)]
    seed: Option<u64>,
}

fn put<T: Into<Value>>(m: &mut Map<String, Value>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        m.insert(key.to_string(), v.into());
    }
}

impl Command {
    fn section(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Scan(_) => "scan",
            Command::Invert(_) => "invert",
            Command::Minimize(_) => "minimize",
            Command::Simulate(_) => "simulate",
            Command::Verify(_) => "verify",
        }
    }

    /// Keys set by dedicated flags.
    fn flag_layer(&self) -> Map<String, Value> {
        let mut m = Map::new();
        match self {
            Command::Solve(a) => {
                put(&mut m, "omega", a.omega);
                put(&mut m, "one_d", a.one_d.then_some(true));
            }
            Command::Scan(a) => {
                put(&mut m, "points", a.points);
                put(&mut m, "spacing", a.spacing.clone());
            }
            Command::Invert(a) => put(&mut m, "mass", a.mass),
            Command::Minimize(a) => {
                put(&mut m, "mass", a.mass);
                put(&mut m, "mass_factor", a.mass_factor);
            }
            Command::Simulate(a) => {
                put(&mut m, "experiment", a.experiment.clone());
                put(&mut m, "omega", a.omega);
                put(&mut m, "delta", a.delta);
                put(&mut m, "t_final", a.t_final);
                put(&mut m, "dt", a.dt);
                put(&mut m, "seed", a.seed);
            }
            Command::Verify(a) => {
                put(&mut m, "quick", a.quick.then_some(true));
                put(&mut m, "seed", a.seed);
            }
        }
        m
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            parse_config(&text).map_err(CliError::config)?
        }
        None => ConfigFile::default(),
    };
    commands::validate_sections(&file)?;
    let mut overrides = Map::new();
    for text in &cli.overrides {
        let (k, v) = parse_assignment(text).map_err(CliError::config)?;
        overrides.insert(k, v);
    }
    let section = cli.command.section();
    let empty = Map::new();
    let from_file = file
        .sections
        .get(section)
        .and_then(Value::as_object)
        .unwrap_or(&empty);
    let flags = cli.command.flag_layer();
    let layers = [from_file, &overrides, &flags];

    let dir = cli
        .output_dir
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| file.output_dir.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
    let out = Output::new(dir, section);
    commands::dispatch(section, &layers, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
