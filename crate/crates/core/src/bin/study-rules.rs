use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use study_rules::commands;
use study_rules::{Error, ErrorClass, RunConfig};

/// Mines study-planning rules from exam-attempt event logs.
#[derive(Parser)]
#[command(name = "study-rules", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate an event log, printing a short report.
    Ingest,
    /// Write the feature matrix (and labels when a label is set).
    Features,
    /// Fit a decision tree; writes tree.json and tree.dot.
    Train,
    /// Read ranked rules off the trained tree; compares them to a plan when given.
    Rules,
    /// Cross-validate trees and write the metrics report.
    Evaluate,
    /// Generate a synthetic event log.
    Synth,
    /// Write the directly-follows graph, partial orders and dotted chart.
    Export,
}

/// Flags override the config file.
#[derive(Args)]
struct Overrides {
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    input: Option<String>,
    #[arg(long, global = true)]
    out: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    k: Option<String>,
    #[arg(long = "max-depth", global = true)]
    max_depth: Option<String>,
    #[arg(long, global = true)]
    features: Option<String>,
    #[arg(long, global = true)]
    label: Option<String>,
    #[arg(long, global = true)]
    plan: Option<String>,
}

fn load_config(o: &Overrides) -> Result<RunConfig, Error> {
    let mut cfg = match &o.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let flags = [
        ("input", &o.input),
        ("out", &o.out),
        ("seed", &o.seed),
        ("k", &o.k),
        ("max_depth", &o.max_depth),
        ("features", &o.features),
        ("label", &o.label),
        ("plan", &o.plan),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("--{}: {m}", key.replace('_', "-"))),
                e => e,
            })?;
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String, Error> {
    let cfg = load_config(&cli.overrides)?;
    match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Features => commands::features(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Rules => commands::rules(&cfg),
        Command::Evaluate => commands::evaluate(&cfg),
        Command::Synth => commands::synth(&cfg),
        Command::Export => commands::export(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Data => 3,
                ErrorClass::Computation => 4,
            })
        }
    }
}
