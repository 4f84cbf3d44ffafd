//! `mohanet` command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod commands;
mod sinks;

pub use commands::parse_duration;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "mohanet", version, about = "Airborne transmission and epidemic simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Still-air cloud trajectories and receiver doses.
    Cloud(ScenarioArgs),
    /// Transient Gaussian puffs in wind.
    Puff(ScenarioArgs),
    /// Steady Gaussian plume in wind.
    Plume(ScenarioArgs),
    /// Receiver doses through the scenario's channel.
    Dose(ScenarioArgs),
    /// Mobile-node epidemic.
    Epidemic(EpidemicArgs),
    /// Mean-field SIR/SEIR curves.
    SirOde(SirOdeArgs),
    /// Distance-to-dose table from the cloud channel.
    Kernel(ScenarioArgs),
    /// Parse and validate a scenario.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Directory prefixed to every output path.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EpidemicArgs {
    #[command(flatten)]
    common: ScenarioArgs,
    /// Independent replications; outputs get an `_r<k>` suffix.
    #[arg(long)]
    replications: Option<u32>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Debug, Args)]
struct SirOdeArgs {
    #[arg(long, default_value_t = 2.0)]
    r0: f64,
    /// Mean infectious period, e.g. `5d`.
    #[arg(long, default_value = "5d", value_parser = parse_duration)]
    infectious_period: f64,
    /// Mean incubation period; enables the exposed compartment.
    #[arg(long, value_parser = parse_duration)]
    incubation_period: Option<f64>,
    /// Initial infectious fraction.
    #[arg(long, default_value_t = 1e-4)]
    i0: f64,
    #[arg(long, default_value = "100d", value_parser = parse_duration)]
    duration: f64,
    #[arg(long, default_value = "1h", value_parser = parse_duration)]
    dt: f64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            eprintln!("error: {}", failure.error);
            failure.code
        }
    }
}
