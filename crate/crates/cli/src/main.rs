//! `pointground`: solve for the ground state and run the accompanying checks.
//!
//! Settings come from flags, then from `--config file.json`, then from
//! built-in defaults. Errors are reported as one JSON object on stderr with
//! exit code 2 (invalid input), 3 (no bracket) or 4 (eigensolver failure).

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use serde::Serialize;
use std::process::ExitCode;

use config::{CommonArgs, RunConfig};

#[derive(Parser)]
#[command(name = "pointground", version, about = "Radial ground states with a point interaction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shoot for the ground state; writes profile and summary.json.
    Solve(CommonArgs),
    /// Pohožaev function and identity residuals; writes pohozaev and pohozaev_summary.json.
    Pohozaev(CommonArgs),
    /// Low spectrum of the linearized sector operators; writes spectrum.json.
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
        /// Angular sector indices.
        #[arg(long, value_delimiter = ',')]
        sectors: Option<Vec<usize>>,
        /// Operator tags, `+` and/or `-`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        tags: Option<Vec<String>>,
        /// Eigenvalues kept per sector.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Perturbed fundamental solution and sign scan; writes perturbed.json.
    Perturbed(CommonArgs),
    /// Green function samples on a log grid; writes green.
    Green(CommonArgs),
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

fn fail(kind: &str, message: String, code: i32) -> ExitCode {
    let report = ErrorReport {
        error: kind,
        message,
        exit_code: code,
    };
    eprintln!("{}", serde_json::to_string(&report).expect("error report serializes"));
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, sectors, tags, k) = match &cli.command {
        Command::Solve(c) | Command::Pohozaev(c) | Command::Perturbed(c) | Command::Green(c) => {
            (c, None, None, None)
        }
        Command::Spectrum {
            common,
            sectors,
            tags,
            k,
        } => (common, sectors.clone(), tags.clone(), *k),
    };
    let cfg = match RunConfig::resolve(common, sectors, tags, k) {
        Ok(c) => c,
        Err(e) => return fail("BadConfig", e.to_string(), 2),
    };
    let outcome = match cli.command {
        Command::Solve(_) => commands::cmd_solve(&cfg),
        Command::Pohozaev(_) => commands::cmd_pohozaev(&cfg),
        Command::Spectrum { .. } => commands::cmd_spectrum(&cfg),
        Command::Perturbed(_) => commands::cmd_perturbed(&cfg),
        Command::Green(_) => commands::cmd_green(&cfg),
    };
    match outcome {
        Ok(files) => {
            for f in files {
                println!("{}", cfg.out.join(f).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), e.to_string(), e.exit_code()),
    }
}
