//! `l1h`: best L1 approximation jobs from JSON files.

mod commands;
mod job;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use commands::{Failure, Outcome, Settings};
use job::JobSpec;

#[derive(Parser)]
#[command(name = "l1h", version, about = "Best L1 approximation of single-jump functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the canonical points of the job's space.
    Canonical(Flags),
    /// Build the approximant and optionally write CSV samples.
    Approximate(Flags),
    /// Check optimality of the approximant (or of a saved one).
    Verify(Flags),
    /// Run the actions listed in the job file.
    Run(Flags),
}

#[derive(Args)]
struct Flags {
    /// Job file.
    #[arg(long)]
    spec: PathBuf,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write sampled values here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Run the discretized oracle on this many cells.
    #[arg(long = "oracle-grid")]
    oracle_grid: Option<usize>,
    /// Add this to every coefficient before verifying.
    #[arg(long, allow_hyphen_values = true)]
    perturb: Option<f64>,
    /// Seed for solver restarts and multistart trials.
    #[arg(long)]
    seed: Option<u64>,
    /// Multistart trials for the uniqueness check.
    #[arg(long)]
    trials: Option<usize>,
    /// Approximant JSON (from `approximate`) to verify instead of recomputing.
    #[arg(long)]
    approximant: Option<PathBuf>,
}

impl Flags {
    fn settings(&self) -> Settings {
        Settings {
            out: self.out.clone(),
            csv: self.csv.clone(),
            oracle_grid: self.oracle_grid,
            perturb: self.perturb,
            seed: self.seed,
            trials: self.trials,
            approximant: self.approximant.clone(),
        }
    }
}

fn emit(value: &Value, path: Option<&PathBuf>) -> Result<(), String> {
    let text = output::to_json(value);
    match path {
        Some(p) => fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("L1H_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors get 1 so that 2..4 keep their meaning
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (flags, handler): (&Flags, fn(&JobSpec, &Settings) -> Result<Outcome, Failure>) = match &cli.command {
        Command::Canonical(f) => (f, commands::canonical),
        Command::Approximate(f) => (f, commands::approximate),
        Command::Verify(f) => (f, commands::verify_cmd),
        Command::Run(f) => (f, commands::run),
    };
    let spec = match JobSpec::load(&flags.spec) {
        Ok(s) => s,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
    };
    let settings = flags.settings();
    let out = settings.out.clone().or_else(|| spec.outputs.json.clone());
    let (value, code) = match handler(&spec, &settings) {
        Ok(Outcome { value, code }) => (value, code),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(1);
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            (commands::error_json(&e), commands::error_code(&e))
        }
    };
    if let Err(msg) = emit(&value, out.as_ref()) {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }
    ExitCode::from(code as u8)
}
