//! Evaluation agents and score aggregation.
//!
//! Each evaluator inspects an intermediate artifact against the contract and
//! the story, and returns a [`FeedbackSignal`]: a 0–10 score, the issues it
//! found, and contract deltas that would address them. Evaluators never fail.

mod checks;
mod score;

use std::fmt;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::contract::{ContractDelta, ContractState, Location, Severity};
use crate::decimal;
use crate::pipeline::{Draft, Manuscript};
use crate::story::ResearchStory;

pub use checks::{
    numeric_literals, CitationHygiene, DataFidelity, Formatting, PassThrough, Structure,
    VisualConsistency,
};
pub(crate) use checks::marker_problem;
pub use score::{aggregate_score, score_delta, ScoreError, Weights};

/// The eight review dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    StructuralIntegrity,
    WritingClarity,
    MethodologicalRigor,
    ExperimentalSubstance,
    CitationHygiene,
    Reproducibility,
    FormattingStability,
    VisualCommunication,
}

impl Dimension {
    pub const ALL: [Dimension; 8] = [
        Dimension::StructuralIntegrity,
        Dimension::WritingClarity,
        Dimension::MethodologicalRigor,
        Dimension::ExperimentalSubstance,
        Dimension::CitationHygiene,
        Dimension::Reproducibility,
        Dimension::FormattingStability,
        Dimension::VisualCommunication,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::StructuralIntegrity => "structural_integrity",
            Dimension::WritingClarity => "writing_clarity",
            Dimension::MethodologicalRigor => "methodological_rigor",
            Dimension::ExperimentalSubstance => "experimental_substance",
            Dimension::CitationHygiene => "citation_hygiene",
            Dimension::Reproducibility => "reproducibility",
            Dimension::FormattingStability => "formatting_stability",
            Dimension::VisualCommunication => "visual_communication",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown dimension `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub code: String,
    pub severity: Severity,
    pub location: Location,
    /// Label, citation key, number or section the issue is about.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub message: String,
}

fn one() -> Decimal {
    Decimal::ONE
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackSignal {
    pub evaluator_id: String,
    pub dimension: Dimension,
    #[serde(with = "decimal")]
    pub score: Decimal,
    #[serde(default)]
    pub issues: Vec<Issue>,
    #[serde(default)]
    pub deltas: Vec<ContractDelta>,
    #[serde(with = "decimal", default = "one")]
    pub confidence: Decimal,
}

impl FeedbackSignal {
    pub fn count(&self, severity: Severity) -> usize {
        self.issues.iter().filter(|i| i.severity == severity).count()
    }

    /// Check range and origin invariants; returns one message per problem.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.score < Decimal::ZERO || self.score > Decimal::TEN {
            out.push(format!("score {} outside [0, 10]", self.score));
        }
        if self.confidence < Decimal::ZERO || self.confidence > Decimal::ONE {
            out.push(format!("confidence {} outside [0, 1]", self.confidence));
        }
        for d in &self.deltas {
            if d.origin != self.evaluator_id {
                out.push(format!("delta `{}` has origin `{}`", d.canonical_key(), d.origin));
            }
        }
        out
    }
}

/// What an evaluator looks at.
#[derive(Debug, Clone, Copy)]
pub enum Artifact<'a> {
    Draft(&'a Draft),
    Drafts(&'a [Draft]),
    Manuscript(&'a Manuscript),
}

impl<'a> Artifact<'a> {
    /// `(section id, text)` pairs in document order.
    pub fn sections(&self) -> Vec<(&'a str, &'a str)> {
        match *self {
            Artifact::Draft(d) => vec![(d.section_id(), d.text())],
            Artifact::Drafts(ds) => ds.iter().map(|d| (d.section_id(), d.text())).collect(),
            Artifact::Manuscript(m) => m.section_texts().collect(),
        }
    }

    /// True when the artifact covers the whole document.
    pub fn is_complete(&self) -> bool {
        !matches!(self, Artifact::Draft(_))
    }
}

pub trait Evaluator: Send + Sync {
    fn id(&self) -> &str;
    fn dimension(&self) -> Dimension;
    fn evaluate(&self, x: Artifact<'_>, contract: &ContractState, story: &ResearchStory) -> FeedbackSignal;
}

/// Score from weighted issues: errors weigh 1, warnings 0.25, and the
/// denominator is the number of checked obligations (at least 1).
pub fn rule_score(issues: &[Issue], checked: usize) -> Decimal {
    let weighted: Decimal = issues
        .iter()
        .map(|i| match i.severity {
            Severity::Error => Decimal::ONE,
            Severity::Warning => Decimal::new(25, 2),
        })
        .sum();
    let denominator = Decimal::from(checked.max(1));
    let ratio = (Decimal::ONE - weighted / denominator).max(Decimal::ZERO);
    decimal::canonical(Decimal::TEN * ratio)
}

/// An ordered, configurable set of evaluators.
pub struct EvaluatorSet {
    evaluators: Vec<Box<dyn Evaluator>>,
}

impl Default for EvaluatorSet {
    fn default() -> Self {
        Self::new(vec![
            Box::new(VisualConsistency),
            Box::new(DataFidelity),
            Box::new(Structure),
            Box::new(CitationHygiene),
            Box::new(Formatting),
            Box::new(PassThrough::new("writing_clarity", Dimension::WritingClarity)),
            Box::new(PassThrough::new("methodological_rigor", Dimension::MethodologicalRigor)),
            Box::new(PassThrough::new("reproducibility", Dimension::Reproducibility)),
        ])
    }
}

impl EvaluatorSet {
    pub fn new(mut evaluators: Vec<Box<dyn Evaluator>>) -> Self {
        evaluators.sort_by(|a, b| a.id().cmp(b.id()));
        Self { evaluators }
    }

    /// Replace the evaluator with the same id, or add it.
    pub fn with(mut self, evaluator: Box<dyn Evaluator>) -> Self {
        self.evaluators.retain(|e| e.id() != evaluator.id());
        self.evaluators.push(evaluator);
        Self::new(self.evaluators)
    }

    pub fn without(mut self, ids: &[String]) -> Self {
        self.evaluators.retain(|e| !ids.iter().any(|id| id == e.id()));
        self
    }

    pub fn ids(&self) -> Vec<&str> {
        self.evaluators.iter().map(|e| e.id()).collect()
    }

    /// One signal per evaluator, in evaluator-id order.
    pub fn run(&self, x: Artifact<'_>, contract: &ContractState, story: &ResearchStory) -> Vec<FeedbackSignal> {
        self.evaluators.iter().map(|e| e.evaluate(x, contract, story)).collect()
    }
}

/// Run the default evaluator set.
pub fn run_evaluators(x: Artifact<'_>, contract: &ContractState, story: &ResearchStory) -> Vec<FeedbackSignal> {
    EvaluatorSet::default().run(x, contract, story)
}
