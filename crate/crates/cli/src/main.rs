//! `rcmf`: experiment runner for the mean-field random-cluster toolkit.
//!
//! Exit codes: 0 success, 2 usage, 3 domain or invalid parameters, 4 io,
//! 5 invariant violation detected during a run.

mod commands;
mod error;
mod options;
mod output;

use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::json;

use error::CliError;
use options::{or_default, Format, Options};
use output::Output;

#[derive(Parser, Debug)]
#[command(name = "rcmf", version, about = "Mean-field random-cluster dynamics experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate phi and the drift f(theta) = theta - phi(theta).
    Drift(Options),
    /// Chayes-Machta trajectories on the component-size state.
    Simulate(Options),
    /// Edge-level heat-bath Glauber trajectories.
    Glauber(Options),
    /// Coupling experiments: coalescence times or Z decay.
    Couple(Options),
    /// Exact transition matrices, gaps and mixing times for n <= 4.
    Exact(Options),
    /// Exact local limit check on an activated-size instance.
    Llt(Options),
    /// Random-walk coupling, reflection and binomial shift checks.
    Rw(Options),
    /// Random graph statistics: tree counts and per-sample observables.
    Stats(Options),
}

impl Command {
    fn split(self) -> (&'static str, Options) {
        match self {
            Command::Drift(o) => ("drift", o),
            Command::Simulate(o) => ("simulate", o),
            Command::Glauber(o) => ("glauber", o),
            Command::Couple(o) => ("couple", o),
            Command::Exact(o) => ("exact", o),
            Command::Llt(o) => ("llt", o),
            Command::Rw(o) => ("rw", o),
            Command::Stats(o) => ("stats", o),
        }
    }
}

fn run(name: &'static str, mut opts: Options) -> Result<(), CliError> {
    opts.merge_config_file()?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
    let clock = Instant::now();
    let format = or_default(&mut opts.format, Format::Csv);
    let dir = opts.out_dir().to_path_buf();
    let mut out = Output::create(&dir, format)?;
    let results = match name {
        "drift" => commands::drift(&mut opts, &mut out),
        "simulate" => commands::simulate(&mut opts, &mut out),
        "glauber" => commands::glauber(&mut opts, &mut out),
        "couple" => commands::couple(&mut opts, &mut out),
        "exact" => commands::exact(&mut opts, &mut out),
        "llt" => commands::llt(&mut opts, &mut out),
        "rw" => commands::rw(&mut opts, &mut out),
        "stats" => commands::stats(&mut opts, &mut out),
        _ => unreachable!("subcommands are fixed by clap"),
    }?;
    let mut artifacts = out.artifacts.clone();
    artifacts.push("summary.json".into());
    let summary = json!({
        "scenario": { "subcommand": name, "options": opts },
        "version": env!("CARGO_PKG_VERSION"),
        "started_unix_s": started,
        "wall_time_s": clock.elapsed().as_secs_f64(),
        "artifacts": artifacts,
        "results": results,
    });
    out.json_value("summary.json", &summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, opts) = cli.command.split();
    match run(name, opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rcmf {name}: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
