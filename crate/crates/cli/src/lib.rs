//! Command-line front end for the msgen pipeline.
//!
//! [`run_cli`] parses arguments, dispatches one subcommand and maps every
//! failure onto an exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | validation failure: violations, blocked render, exhausted adaptation |
//! | 2 | input or configuration error |
//! | 3 | agent backend failure |
//! | 4 | internal error |
//!
//! Results go to standard output and diagnostics to standard error.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use msgen_core::agents::AgentError;
use msgen_core::contract::{validate_document, ContractState, Severity};
use msgen_core::decimal::{format_signed, reported};
use msgen_core::evaluate::{aggregate_score, score_delta, FeedbackSignal, ScoreError, Weights};
use msgen_core::pipeline::{self, PipelineError, RunConfig, RunJournal, Stage};
use msgen_core::render::{scan, RenderError};
use msgen_core::story::{self, StoryError};
use rust_decimal::Decimal;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "msgen", version, about = "Contract-governed manuscript generation")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Fixture directory for the scripted backend.
    #[arg(long, global = true, value_name = "DIR")]
    pub fixtures: Option<PathBuf>,
    /// Deterministic journal timestamps.
    #[arg(long, global = true)]
    pub fixed_clock: bool,
    /// Draft sections one at a time against the latest contract.
    #[arg(long, global = true)]
    pub strict_sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a manuscript from a research story.
    Run {
        story: PathBuf,
        /// Output directory (default: `output_dir` from the config, else `out`).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Check a LaTeX manuscript against a contract.
    Validate { tex: PathBuf, contract: PathBuf },
    /// Aggregate a JSON array of feedback signals.
    Score {
        signals: PathBuf,
        /// JSON object of per-dimension weights (default: equal).
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Second signal file; prints this file's aggregate minus that one's,
        /// both taken as printed (three decimals).
        #[arg(long)]
        compare: Option<PathBuf>,
    },
    /// Print a run journal as a table.
    Journal {
        journal: PathBuf,
        /// Fail when error counts rise along the adapt trajectory.
        #[arg(long)]
        assert_monotone: bool,
        /// Show only these stages.
        #[arg(long, value_enum, value_delimiter = ',')]
        stage: Vec<StageArg>,
    },
    /// Print a commented story template.
    Init,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StageArg {
    Architect,
    Write,
    Evaluate,
    Refine,
    Render,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Architect => Stage::Architect,
            StageArg::Write => Stage::Write,
            StageArg::Evaluate => Stage::Evaluate,
            StageArg::Refine => Stage::Refine,
            StageArg::Render => Stage::Render,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read `{}`: {source}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write `{}`: {source}", path.display())]
    Write { path: PathBuf, source: std::io::Error },
    #[error("`{}`: {message}", path.display())]
    Input { path: PathBuf, message: String },
    #[error("`{}`: {source}", path.display())]
    Story { path: PathBuf, source: StoryError },
    #[error(transparent)]
    Config(#[from] pipeline::ConfigError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Pipeline(#[from] Box<pipeline::StageFailure>),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("{0}")]
    Violations(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } | CliError::Write { .. } | CliError::Input { .. } => 2,
            CliError::Story { .. } | CliError::Config(_) => 2,
            CliError::Agent(e) => agent_code(e),
            CliError::Pipeline(f) => match &f.error {
                PipelineError::Agent(e) => agent_code(e),
                PipelineError::BlueprintInvalid(_)
                | PipelineError::Contract(_)
                | PipelineError::DraftRejected { .. }
                | PipelineError::AdaptExhausted { .. }
                | PipelineError::Mismatch(_)
                | PipelineError::RenderBlocked(_) => 1,
                PipelineError::Render(RenderError::UnknownMarker(_) | RenderError::UnplacedArtifact(_)) => 1,
                PipelineError::Render(_) => 4,
                PipelineError::Score(e) => score_code(e),
            },
            CliError::Score(e) => score_code(e),
            CliError::Violations(_) => 1,
        }
    }
}

fn agent_code(e: &AgentError) -> i32 {
    match e {
        AgentError::Config(_) => 2,
        AgentError::BackendUnavailable { .. } | AgentError::MalformedResponse { .. } | AgentError::ScenarioMiss { .. } => 3,
    }
}

fn score_code(e: &ScoreError) -> i32 {
    match e {
        ScoreError::DuplicateDimension(_) => 1,
        ScoreError::NoSignals | ScoreError::InvalidWeight { .. } | ScoreError::ZeroWeights => 2,
    }
}

/// Parse `args` (including the program name), run the command and return the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Run { story, out: dir } => cmd_run(cli, story, dir.as_deref(), out, err),
        Command::Validate { tex, contract } => cmd_validate(tex, contract, out),
        Command::Score { signals, weights, compare } => {
            cmd_score(cli, signals, weights.as_deref(), compare.as_deref(), out)
        }
        Command::Journal { journal, assert_monotone, stage } => cmd_journal(journal, *assert_monotone, stage, out),
        Command::Init => {
            let _ = write!(out, "{}", story::template());
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.fixtures {
        config.backend = pipeline::BackendConfig::Scripted { fixtures: Some(dir.clone()) };
    }
    config.fixed_clock |= cli.fixed_clock;
    config.strict_sequential |= cli.strict_sequential;
    Ok(config)
}

fn cmd_run(cli: &Cli, story_path: &Path, dir: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let config = load_config(cli)?;
    let bytes = std::fs::read(story_path).map_err(|source| CliError::Read { path: story_path.to_path_buf(), source })?;
    let story = story::parse_story(&bytes).map_err(|source| CliError::Story { path: story_path.to_path_buf(), source })?;
    let backend = config.build_backend()?;
    let dir = dir.map(Path::to_path_buf).or_else(|| config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let write_err = |source| CliError::Write { path: dir.clone(), source };
    match pipeline::run(&story, &config, backend.as_ref()) {
        Ok(outcome) => {
            pipeline::write_outputs(&dir, &outcome).map_err(write_err)?;
            let _ = writeln!(out, "{:.3}", reported(outcome.score));
            Ok(())
        }
        Err(failure) => {
            if let Err(e) = pipeline::write_journals(&dir, &failure.journal, &failure.contract) {
                let _ = writeln!(err, "warning: could not write partial journals: {e}");
            }
            Err(CliError::Pipeline(failure))
        }
    }
}

fn cmd_validate(tex: &Path, contract: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let latex = read(tex)?;
    let contract_text = read(contract)?;
    let contract = ContractState::from_json(&contract_text)
        .map_err(|e| CliError::Input { path: contract.to_path_buf(), message: e.to_string() })?;
    let doc = scan(&latex).map_err(|e| CliError::Input { path: tex.to_path_buf(), message: e.to_string() })?;
    let violations = validate_document(&contract, &doc);
    for v in &violations {
        let _ = writeln!(out, "{v}");
    }
    let errors = violations.iter().filter(|v| v.severity == Severity::Error).count();
    if errors > 0 {
        return Err(CliError::Violations(format!("{errors} error-severity violation(s)")));
    }
    Ok(())
}

fn load_signals(path: &Path) -> Result<Vec<FeedbackSignal>, CliError> {
    let text = read(path)?;
    let signals: Vec<FeedbackSignal> =
        serde_json::from_str(&text).map_err(|e| CliError::Input { path: path.to_path_buf(), message: e.to_string() })?;
    let problems: Vec<String> = signals.iter().flat_map(|s| s.problems()).collect();
    if !problems.is_empty() {
        return Err(CliError::Input { path: path.to_path_buf(), message: problems.join("; ") });
    }
    Ok(signals)
}

fn cmd_score(cli: &Cli, signals: &Path, weights: Option<&Path>, compare: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let weights: Weights = match weights {
        Some(path) => serde_json::from_str(&read(path)?)
            .map_err(|e| CliError::Input { path: path.to_path_buf(), message: e.to_string() })?,
        None => load_config(cli)?.weights,
    };
    let aggregate = |path: &Path| -> Result<Decimal, CliError> { Ok(aggregate_score(&load_signals(path)?, &weights)?) };
    let a = reported(aggregate(signals)?);
    let _ = writeln!(out, "{a:.3}");
    if let Some(other) = compare {
        let b = reported(aggregate(other)?);
        let _ = writeln!(out, "{}", format_signed(score_delta(a, b), 3));
    }
    Ok(())
}

fn cmd_journal(path: &Path, assert_monotone: bool, stages: &[StageArg], out: &mut dyn Write) -> Result<(), CliError> {
    let journal = RunJournal::from_jsonl(&read(path)?)
        .map_err(|e| CliError::Input { path: path.to_path_buf(), message: e.to_string() })?;
    let shown = if stages.is_empty() {
        journal.clone()
    } else {
        journal.only(&stages.iter().copied().map(Stage::from).collect::<Vec<_>>())
    };
    let _ = write!(out, "{}", shown.table());
    if assert_monotone {
        journal.check_monotone().map_err(CliError::Violations)?;
    }
    Ok(())
}
