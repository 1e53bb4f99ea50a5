//! The generate–evaluate–adapt orchestrator.
//!
//! [`run`] drives one story through architect, per-section writing with
//! evaluation and contract updates, the refine loop and the renderer. Every
//! stage leaves an entry in the [`RunJournal`].

mod config;
mod journal;
mod types;

use std::collections::BTreeMap;
use std::path::Path;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use serde::Serialize;
use thiserror::Error;

use crate::agents::{dispatch, AgentBackend, AgentContent, AgentError, AgentRequest};
use crate::canonical;
use crate::contract::{
    ContractDelta, ContractError, ContractState, DeltaAction, Severity, ValidationRule, Violation,
};
use crate::evaluate::{aggregate_score, Artifact, EvaluatorSet, FeedbackSignal, Issue, ScoreError, Weights};
use crate::render::{renderer_stage, scan, RenderError};
use crate::story::ResearchStory;

pub use config::{BackendConfig, ConfigError, RunConfig};
pub use journal::{Clock, JournalEntry, JournalError, RunJournal, Stage};
pub use types::{paragraph_ranges, Blueprint, Draft, Manuscript, ManuscriptSection, SectionSpec};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("blueprint is invalid: {}", .0.join("; "))]
    BlueprintInvalid(Vec<String>),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error("draft for `{section}` references unregistered labels {labels:?} after {attempts} attempt(s)")]
    DraftRejected { section: String, labels: Vec<String>, attempts: usize },
    #[error("{} error issue(s) remain after {iterations} adapt iteration(s): {}", .issues.len(), issue_list(.issues))]
    AdaptExhausted { iterations: usize, issues: Vec<Issue> },
    #[error("{0}")]
    Mismatch(String),
    #[error("render blocked by {} violation(s):\n{}", .0.len(), violation_list(.0))]
    RenderBlocked(Vec<Violation>),
    #[error(transparent)]
    Render(RenderError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

fn issue_list(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(|i| format!("{} {}", i.code, i.subject.as_deref().unwrap_or("")))
        .collect::<Vec<_>>()
        .join(", ")
}

fn violation_list(violations: &[Violation]) -> String {
    violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

impl From<RenderError> for PipelineError {
    fn from(e: RenderError) -> Self {
        match e {
            RenderError::RenderBlocked(v) => PipelineError::RenderBlocked(v),
            other => PipelineError::Render(other),
        }
    }
}

/// A failed run: the stage that failed, why, and everything recorded so far.
#[derive(Debug, Error)]
#[error("{stage} stage failed: {error}")]
pub struct StageFailure {
    pub stage: Stage,
    #[source]
    pub error: PipelineError,
    pub journal: RunJournal,
    pub contract: ContractState,
}

/// Everything a successful run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub blueprint: Blueprint,
    pub manuscript: Manuscript,
    pub contract: ContractState,
    pub journal: RunJournal,
    /// Signals from the final evaluation pass.
    pub signals: Vec<FeedbackSignal>,
    pub score: Decimal,
}

/// Plan the manuscript and seed the contract from the blueprint.
pub fn architect_stage(
    story: &ResearchStory,
    c0: &ContractState,
    backend: &dyn AgentBackend,
) -> Result<(Blueprint, ContractState), PipelineError> {
    if c0.version() != 0 {
        return Err(PipelineError::Mismatch(format!(
            "architect needs a fresh contract, got version {}",
            c0.version()
        )));
    }
    let resp = dispatch(backend, &AgentRequest::architect(story, c0))?;
    let AgentContent::Architect { blueprint } = resp.content else {
        unreachable!("dispatch checks the response role")
    };
    let problems = blueprint.problems(story);
    if !problems.is_empty() {
        return Err(PipelineError::BlueprintInvalid(problems));
    }
    let mut c = c0.clone();
    for artifact in &blueprint.artifact_proposals {
        c = c.register_artifact(artifact.clone())?;
    }
    for key in &blueprint.citation_proposals {
        c = c.add_citation(key)?;
    }
    let ordered = blueprint.ordered_sections();
    for spec in &ordered {
        for label in &spec.bound_artifacts {
            c = c.bind_obligation(&spec.section_id, label)?;
        }
        for key in &spec.required_citations {
            c = c.require_citation(&spec.section_id, key)?;
        }
    }
    let order = ordered.iter().map(|s| s.section_id.clone()).collect();
    let rule = ContractDelta::new(
        DeltaAction::AddRule { rule: ValidationRule::section_order(order, Severity::Error) },
        "architect",
    );
    c = c.apply_deltas([&rule])?;
    Ok((blueprint, c))
}

/// Draft one section, retrying while markers name unregistered labels.
pub fn writer_stage(
    scenario: &str,
    spec: &SectionSpec,
    c: &ContractState,
    backend: &dyn AgentBackend,
    max_attempts: usize,
) -> Result<Draft, PipelineError> {
    let req = AgentRequest::writer(scenario, spec, c);
    let mut unknown = Vec::new();
    for attempt in 1..=max_attempts.max(1) {
        let resp = dispatch(backend, &req)?;
        let AgentContent::Writer { section_id, text } = resp.content else {
            unreachable!("dispatch checks the response role")
        };
        if section_id != spec.section_id {
            return Err(PipelineError::Mismatch(format!(
                "writer answered for `{section_id}` instead of `{}`",
                spec.section_id
            )));
        }
        let draft = Draft::new(section_id, text);
        unknown = draft
            .markers()
            .iter()
            .filter(|m| m.is_visual() && c.artifact(&m.label).is_none())
            .map(|m| m.label.clone())
            .collect();
        if unknown.is_empty() {
            return Ok(draft);
        }
        tracing::warn!(section = %spec.section_id, attempt, ?unknown, "draft references unregistered labels");
    }
    Err(PipelineError::DraftRejected {
        section: spec.section_id.clone(),
        labels: unknown,
        attempts: max_attempts.max(1),
    })
}

/// Shared state for a single run.
struct Orchestrator<'a> {
    story: &'a ResearchStory,
    backend: &'a dyn AgentBackend,
    evaluators: EvaluatorSet,
    weights: Weights,
    config: &'a RunConfig,
    clock: Clock,
    journal: RunJournal,
    contract: ContractState,
}

struct Counts {
    errors: usize,
    warnings: usize,
}

fn counts(signals: &[FeedbackSignal]) -> Counts {
    Counts {
        errors: signals.iter().map(|s| s.count(Severity::Error)).sum(),
        warnings: signals.iter().map(|s| s.count(Severity::Warning)).sum(),
    }
}

fn to_f64(d: Decimal) -> f64 {
    d.to_f64().unwrap_or(f64::NAN)
}

impl Orchestrator<'_> {
    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        stage: Stage,
        section: Option<&str>,
        iteration: Option<usize>,
        version_before: u64,
        counts: Counts,
        signals: &[FeedbackSignal],
        note: Option<String>,
    ) {
        let scores = signals.iter().map(|s| (s.evaluator_id.clone(), to_f64(s.score))).collect();
        let aggregate = if signals.is_empty() {
            None
        } else {
            aggregate_score(signals, &self.weights).ok().map(to_f64)
        };
        let timestamp = self.clock.now();
        self.journal.push(JournalEntry {
            seq: 0,
            stage,
            section: section.map(str::to_string),
            iteration,
            version_before,
            version_after: self.contract.version(),
            errors: counts.errors,
            warnings: counts.warnings,
            scores,
            aggregate,
            note,
            timestamp,
        });
    }

    /// Evaluate `x`, fold the feedback into the contract and journal it.
    fn evaluate(
        &mut self,
        x: Artifact<'_>,
        section: Option<&str>,
        iteration: Option<usize>,
    ) -> Result<Vec<FeedbackSignal>, PipelineError> {
        let signals = self.evaluators.run(x, &self.contract, self.story);
        let before = self.contract.version();
        self.contract = self.contract.update(&signals)?;
        self.record(Stage::Evaluate, section, iteration, before, counts(&signals), &signals, None);
        Ok(signals)
    }

    fn architect(&mut self) -> Result<Blueprint, PipelineError> {
        let before = self.contract.version();
        let (blueprint, c) = architect_stage(self.story, &self.contract, self.backend)?;
        self.contract = c;
        let note = format!(
            "{} section(s), {} artifact(s), {} citation(s)",
            blueprint.sections.len(),
            blueprint.artifact_proposals.len(),
            blueprint.citation_proposals.len()
        );
        self.record(Stage::Architect, None, None, before, Counts { errors: 0, warnings: 0 }, &[], Some(note));
        Ok(blueprint)
    }

    fn write(&mut self, blueprint: &Blueprint) -> Result<Vec<Draft>, PipelineError> {
        let ordered = blueprint.ordered_sections();
        let attempts = self.config.max_adapt_iterations;
        let scenario = self.story.id.as_str();
        let mut drafts = Vec::with_capacity(ordered.len());
        if self.config.strict_sequential {
            for spec in ordered {
                let draft = writer_stage(scenario, spec, &self.contract, self.backend, attempts)?;
                self.merge_draft(&draft)?;
                drafts.push(draft);
            }
            return Ok(drafts);
        }
        // Fan-out: every writer sees the same frozen snapshot; merges happen in order.
        let snapshot = self.contract.clone();
        let backend = self.backend;
        let results: Vec<Result<Draft, PipelineError>> = std::thread::scope(|scope| {
            let handles: Vec<_> = ordered
                .iter()
                .map(|spec| {
                    let snapshot = &snapshot;
                    scope.spawn(move || writer_stage(scenario, spec, snapshot, backend, attempts))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("writer thread panicked")).collect()
        });
        for result in results {
            let draft = result?;
            self.merge_draft(&draft)?;
            drafts.push(draft);
        }
        Ok(drafts)
    }

    fn merge_draft(&mut self, draft: &Draft) -> Result<(), PipelineError> {
        let version = self.contract.version();
        let note = format!("{} marker(s)", draft.markers().len());
        self.record(Stage::Write, Some(draft.section_id()), None, version, Counts { errors: 0, warnings: 0 }, &[], Some(note));
        self.evaluate(Artifact::Draft(draft), Some(draft.section_id()), None)?;
        Ok(())
    }

    fn refine(&mut self, blueprint: &Blueprint, drafts: Vec<Draft>) -> Result<(Manuscript, Vec<FeedbackSignal>), PipelineError> {
        let ordered = blueprint.ordered_sections();
        let mut current = drafts;
        let iterations = self.config.max_adapt_iterations;
        for iteration in 0..iterations {
            let req = AgentRequest::refiner(&self.story.id, iteration, &current, &self.contract);
            let resp = dispatch(self.backend, &req)?;
            let AgentContent::Refiner { sections, deltas } = resp.content else {
                unreachable!("dispatch checks the response role")
            };
            if sections.len() != ordered.len() {
                return Err(PipelineError::Mismatch(format!(
                    "refiner returned {} section(s) for a {}-section blueprint",
                    sections.len(),
                    ordered.len()
                )));
            }
            let mut manuscript_sections = Vec::with_capacity(ordered.len());
            for spec in &ordered {
                let refined = sections.iter().find(|s| s.section_id == spec.section_id).ok_or_else(|| {
                    PipelineError::Mismatch(format!("refiner output lacks section `{}`", spec.section_id))
                })?;
                manuscript_sections.push(ManuscriptSection { spec: (*spec).clone(), text: refined.text.clone() });
            }
            let before = self.contract.version();
            let deltas: Vec<ContractDelta> =
                deltas.into_iter().map(|d| ContractDelta::new(d.action, "refiner")).collect();
            self.contract = self.contract.apply_deltas(&deltas)?;
            self.record(
                Stage::Refine,
                None,
                Some(iteration),
                before,
                Counts { errors: 0, warnings: 0 },
                &[],
                Some(format!("{} delta(s)", deltas.len())),
            );
            let manuscript = Manuscript {
                title: self.story.title.clone(),
                sections: manuscript_sections,
                contract_version_at_freeze: self.contract.version(),
                rendered: None,
            };
            let signals = self.evaluate(Artifact::Manuscript(&manuscript), None, Some(iteration))?;
            let errors: Vec<Issue> = signals
                .iter()
                .flat_map(|s| s.issues.iter())
                .filter(|i| i.severity == Severity::Error)
                .cloned()
                .collect();
            if errors.is_empty() {
                let mut manuscript = manuscript;
                manuscript.contract_version_at_freeze = self.contract.version();
                return Ok((manuscript, signals));
            }
            if iteration + 1 == iterations {
                return Err(PipelineError::AdaptExhausted { iterations, issues: errors });
            }
            current = manuscript.sections.iter().map(|s| Draft::new(s.spec.section_id.clone(), s.text.clone())).collect();
        }
        unreachable!("max_adapt_iterations is at least 1")
    }

    fn render(&mut self, manuscript: &Manuscript) -> Result<Manuscript, PipelineError> {
        let before = self.contract.version();
        match renderer_stage(manuscript, &self.contract) {
            Ok(rendered) => {
                let bytes = rendered.rendered.as_ref().map_or(0, String::len);
                self.record(Stage::Render, None, None, before, Counts { errors: 0, warnings: 0 }, &[], Some(format!("{bytes} bytes")));
                Ok(rendered)
            }
            Err(e) => {
                let errors = match &e {
                    RenderError::RenderBlocked(v) => v.len(),
                    _ => 1,
                };
                self.record(Stage::Render, None, None, before, Counts { errors, warnings: 0 }, &[], Some(e.to_string()));
                Err(e.into())
            }
        }
    }
}

/// Run the full pipeline on `story`.
pub fn run(story: &ResearchStory, config: &RunConfig, backend: &dyn AgentBackend) -> Result<RunOutcome, Box<StageFailure>> {
    let mut o = Orchestrator {
        story,
        backend,
        evaluators: config.evaluators(),
        weights: config.weights.clone(),
        config,
        clock: if config.fixed_clock { Clock::fixed() } else { Clock::system() },
        journal: RunJournal::new(),
        contract: ContractState::new(),
    };
    macro_rules! stage {
        ($stage:expr, $e:expr) => {
            match $e {
                Ok(v) => v,
                Err(error) => {
                    return Err(Box::new(StageFailure {
                        stage: $stage,
                        error,
                        journal: o.journal,
                        contract: o.contract,
                    }))
                }
            }
        };
    }
    let blueprint = stage!(Stage::Architect, o.architect());
    let drafts = stage!(Stage::Write, o.write(&blueprint));
    let (manuscript, signals) = stage!(Stage::Refine, o.refine(&blueprint, drafts));
    let manuscript = stage!(Stage::Render, o.render(&manuscript));
    let score = stage!(Stage::Render, aggregate_score(&signals, &o.weights).map_err(PipelineError::from));
    Ok(RunOutcome { blueprint, manuscript, contract: o.contract, journal: o.journal, signals, score })
}

#[derive(Serialize)]
struct ScoreReport<'a> {
    aggregate: f64,
    dimensions: BTreeMap<&'a str, f64>,
    evaluators: BTreeMap<&'a str, f64>,
}

/// `score.json`: aggregate plus per-dimension and per-evaluator scores.
pub fn score_report(signals: &[FeedbackSignal], aggregate: Decimal) -> String {
    let report = ScoreReport {
        aggregate: to_f64(aggregate),
        dimensions: signals.iter().map(|s| (s.dimension.as_str(), to_f64(s.score))).collect(),
        evaluators: signals.iter().map(|s| (s.evaluator_id.as_str(), to_f64(s.score))).collect(),
    };
    canonical::to_canonical_file(&report).expect("score report serializes")
}

/// Output file names written by [`write_outputs`].
pub const OUTPUT_FILES: [&str; 6] = [
    "manuscript.tex",
    "manuscript.scan.json",
    "run.journal.jsonl",
    "score.json",
    "manuscript.contract.json",
    "contract.journal.jsonl",
];

/// Write every artifact of a successful run into `dir`.
pub fn write_outputs(dir: &Path, outcome: &RunOutcome) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let latex = outcome.manuscript.rendered.as_deref().unwrap_or_default();
    let scanned = scan(latex).map_err(std::io::Error::other)?;
    std::fs::write(dir.join(OUTPUT_FILES[0]), latex)?;
    std::fs::write(
        dir.join(OUTPUT_FILES[1]),
        canonical::to_canonical_file(&scanned).map_err(std::io::Error::other)?,
    )?;
    write_journals(dir, &outcome.journal, &outcome.contract)?;
    std::fs::write(dir.join(OUTPUT_FILES[3]), score_report(&outcome.signals, outcome.score))?;
    Ok(())
}

/// Write the run journal, the contract and its update log (also used after failures).
pub fn write_journals(dir: &Path, journal: &RunJournal, contract: &ContractState) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(OUTPUT_FILES[2]), journal.to_jsonl())?;
    std::fs::write(dir.join(OUTPUT_FILES[4]), contract.to_canonical_file())?;
    std::fs::write(dir.join(OUTPUT_FILES[5]), contract.journal_jsonl())?;
    Ok(())
}
