//! `triage`: runs the hypoxemia triage workflow stage by stage or end to end.
//!
//! Exit codes: 0 success, 2 input/schema/config error, 3 some rows or
//! admissions failed while the rest completed, 4 numerical or stage failure.

mod artifacts;
mod commands;
mod config;
mod error;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::artifacts::Workspace;
use crate::commands::{Context, Issues};
use crate::config::RunConfig;
use crate::error::{CliError, EXIT_ROWS};

#[derive(Debug, Parser)]
#[command(name = "triage", version, about = "Hypoxemia severity scoring, preprocessing and prediction")]
struct Cli {
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the normalized scoring matrix as JSON and exit.
    #[arg(long)]
    dump_matrix: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic raw vitals CSV (raw.csv).
    Synth {
        #[arg(long)]
        patients: Option<usize>,
    },
    /// Score raw rows: TAG columns, severity label and alarm runs.
    Score { input: PathBuf },
    /// Merge, sanitize and filter raw records (cleaned.csv).
    Preprocess { input: Option<PathBuf> },
    /// Chained-equations imputation with masks (imputed.csv).
    Impute,
    /// Interpolate, score, split and export model inputs.
    Dataset,
    /// Train the boosted-tree classifier (model.json).
    Train,
    /// Evaluate the model on the test split (report.json).
    Evaluate,
    /// Correlation matrix and PCA of the scored frame.
    Analyze,
    /// All stages in order; synthesizes input when none is configured.
    Run {
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn context(cli: &Cli) -> Result<Context, CliError> {
    let base = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut config = base.effective(cli.seed)?;
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    let matrix = commands::load_matrix(&config)?;
    let ws = Workspace::new(config.output_dir.clone(), config.hash(), config.seed)?;
    Ok(Context { config, ws, matrix })
}

fn raw_input(ctx: &Context, arg: &Option<PathBuf>) -> PathBuf {
    arg.clone()
        .or_else(|| ctx.config.input.clone())
        .unwrap_or_else(|| ctx.ws.path(commands::RAW))
}

fn run_all(ctx: &Context, input: &Option<PathBuf>) -> Result<Issues, CliError> {
    let mut issues = 0;
    let input = match input.clone().or_else(|| ctx.config.input.clone()) {
        Some(p) => p,
        None => {
            commands::synth(ctx)?;
            ctx.ws.path(commands::RAW)
        }
    };
    let s = &ctx.config.stages;
    if s.preprocess {
        issues += commands::run_preprocess(ctx, &input)?;
    }
    if s.impute {
        issues += commands::run_impute(ctx)?;
    }
    if s.dataset {
        issues += commands::run_dataset(ctx)?;
    }
    if s.train {
        issues += commands::run_train(ctx)?;
    }
    if s.evaluate {
        issues += commands::run_evaluate(ctx)?;
    }
    if s.analyze {
        issues += commands::run_analyze(ctx)?;
    }
    Ok(issues)
}

fn execute(cli: Cli) -> Result<Issues, CliError> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::input("jobs", e.to_string()))?;
    }
    if cli.dump_matrix {
        let config = match &cli.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let matrix = commands::load_matrix(&config)?;
        let text = serde_json::to_string_pretty(&matrix.dump()).expect("matrix serializes");
        // A closed pipe (e.g. `| head`) is not an error worth reporting.
        let _ = writeln!(std::io::stdout().lock(), "{text}");
        return Ok(0);
    }
    let Some(command) = &cli.command else {
        return Err(CliError::input("cli", "no subcommand given; see --help"));
    };
    let mut ctx = context(&cli)?;
    let issues = match command {
        Command::Synth { patients } => {
            if let Some(n) = patients {
                ctx.config.synth.patients = *n;
                ctx.ws.config_hash = ctx.config.hash();
            }
            commands::synth(&ctx)?
        }
        Command::Score { input } => commands::score(&ctx, input)?,
        Command::Preprocess { input } => commands::run_preprocess(&ctx, &raw_input(&ctx, input))?,
        Command::Impute => commands::run_impute(&ctx)?,
        Command::Dataset => commands::run_dataset(&ctx)?,
        Command::Train => commands::run_train(&ctx)?,
        Command::Evaluate => commands::run_evaluate(&ctx)?,
        Command::Analyze => commands::run_analyze(&ctx)?,
        Command::Run { input } => run_all(&ctx, input)?,
    };
    ctx.ws.write_manifest()?;
    Ok(issues)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(n) => {
            eprintln!("warning: {n} row-level issue(s); see the stage reports");
            ExitCode::from(EXIT_ROWS as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code as u8)
        }
    }
}
