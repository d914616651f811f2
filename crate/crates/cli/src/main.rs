use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use flatcrane::{load_config, run_subcommand, CoriolisVariant, Error, ErrorClass, Subcommand};
use serde_json::json;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    /// Write the flat-output reference (reference.csv).
    Plan,
    /// Feedforward trajectory and diagnostics (trajectory.csv, diagnostics.json).
    Ff,
    /// Euler rollout from x0 under an input sequence (simulation.csv).
    Simulate,
    /// Regularity and submersivity report along the plan (check.json).
    Check,
    /// Tidy long-format series for plotting (plot.csv).
    ExportPlot,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::Plan => Subcommand::Plan,
            Command::Ff => Subcommand::Ff,
            Command::Simulate => Subcommand::Simulate,
            Command::Check => Subcommand::Check,
            Command::ExportPlot => Subcommand::ExportPlot,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Variant {
    Printed,
    Lagrange,
}

/// Rest-to-rest feedforward for a stacker crane with a flexible mast.
#[derive(Debug, Parser)]
#[command(name = "flatcrane", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,

    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,

    /// Output directory; overrides `output.dir` of the configuration.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Coriolis vector used by the model.
    #[arg(long, value_enum)]
    variant: Option<Variant>,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Numerical => 3,
        ErrorClass::Io => 4,
    }
}

fn run(cli: &Cli) -> Result<serde_json::Value, Error> {
    let mut cfg = load_config(&cli.config)?;
    if let Some(v) = cli.variant {
        cfg.variant = match v {
            Variant::Printed => CoriolisVariant::Printed,
            Variant::Lagrange => CoriolisVariant::Lagrange,
        };
    }
    let report = run_subcommand(cli.command.into(), &cfg, cli.out.as_deref())?;
    for f in &report.files {
        log::info!("wrote {}", f.display());
    }
    Ok(json!({
        "command": report.command.name(),
        "files": report.files.iter().map(|f| f.display().to_string()).collect::<Vec<_>>(),
        "summary": report.summary,
    }))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FLATCRANE_LOG", "error"))
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&out).expect("JSON values always serialize")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            let err = json!({
                "error": {
                    "kind": e.kind(),
                    "message": e.to_string(),
                    "step": e.step(),
                }
            });
            eprintln!("{err}");
            ExitCode::from(exit_code(&e))
        }
    }
}
