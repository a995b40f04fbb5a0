mod args;
mod commands;
mod config;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, Format, OutputArgs};
use config::{CfConfig, LimitConfig, RunConfig, SimulateConfig, VerifyConfig};
use error::CliError;
use manifest::Manifest;

fn resolve<T>(
    out: &OutputArgs,
    from_args: impl FnOnce() -> Result<T, CliError>,
    unwrap: impl FnOnce(RunConfig) -> Option<T>,
    wrap: impl FnOnce(T) -> RunConfig,
    name: &str,
) -> Result<RunConfig, CliError> {
    let cfg = match &out.config {
        Some(path) => {
            let loaded = RunConfig::load(path)?;
            let command = loaded.command();
            unwrap(loaded).ok_or_else(|| {
                CliError::Validation(format!("{} holds a `{command}` config, not `{name}`", path.display()))
            })?
        }
        None => from_args()?,
    };
    Ok(wrap(cfg))
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Validation(format!("--threads: {e}")))?;
    }
    let (config, out) = match &cli.command {
        Command::Simulate(a) => (
            resolve(
                &a.out,
                || SimulateConfig::from_args(a),
                |c| match c {
                    RunConfig::Simulate(c) => Some(c),
                    _ => None,
                },
                RunConfig::Simulate,
                "simulate",
            )?,
            &a.out,
        ),
        Command::Cf(a) => (
            resolve(
                &a.out,
                || CfConfig::from_args(a),
                |c| match c {
                    RunConfig::Cf(c) => Some(c),
                    _ => None,
                },
                RunConfig::Cf,
                "cf",
            )?,
            &a.out,
        ),
        Command::Limit(a) => (
            resolve(
                &a.out,
                || LimitConfig::from_args(a),
                |c| match c {
                    RunConfig::Limit(c) => Some(c),
                    _ => None,
                },
                RunConfig::Limit,
                "limit",
            )?,
            &a.out,
        ),
        Command::Verify(a) => (
            resolve(
                &a.out,
                || VerifyConfig::from_args(a),
                |c| match c {
                    RunConfig::Verify(c) => Some(c),
                    _ => None,
                },
                RunConfig::Verify,
                "verify",
            )?,
            &a.out,
        ),
    };
    // Loaded configs get the same checks as flag-built ones.
    match &config {
        RunConfig::Simulate(c) => c.check()?,
        RunConfig::Cf(c) => c.check()?,
        RunConfig::Limit(c) => c.check()?,
        RunConfig::Verify(c) => c.check()?,
    }

    let sink = commands::open_output(out.output.as_deref())?;
    let result = match &config {
        RunConfig::Simulate(c) => {
            let dump = match &cli.command {
                Command::Simulate(a) => a.dump_paths.as_deref(),
                _ => None,
            };
            commands::simulate(c, out.format.unwrap_or(Format::Csv), sink, dump)
        }
        RunConfig::Cf(c) => commands::cf(c, out.format.unwrap_or(Format::Csv), sink),
        RunConfig::Limit(c) => commands::limit(c, out.format.unwrap_or(Format::Csv), sink),
        RunConfig::Verify(c) => commands::verify(c, out.format.unwrap_or(Format::Json), sink),
    };
    // Failed checks and partial results still leave a manifest behind.
    match &result {
        Ok(()) | Err(CliError::VerificationFailed(_) | CliError::NotConverged(_)) => {
            Manifest::new(&config).write(out.manifest.as_deref(), out.output.as_deref())?
        }
        Err(_) => {}
    }
    result
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
