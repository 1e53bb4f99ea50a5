//! The shared visual contract.
//!
//! A [`ContractState`] holds three layers: the global registry of figures and
//! tables, per-section obligations, and document-wide validation rules. It is
//! an immutable value: each operation returns a successor state with a higher
//! version and an extended update log. Folding the log over
//! [`ContractState::new`] reproduces the state exactly.

mod delta;
pub mod label;
mod rules;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::evaluate::FeedbackSignal;

pub use delta::{ContractDelta, ContractEvent, DeltaAction, LogRecord};
pub use label::{is_valid_label, label_kind, normalize_label};
pub use rules::{RuleKind, RuleParams, Severity, ValidationRule};
pub use validate::{validate_document, Location, Violation, MIN_EXPLANATION_WORDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Figure,
    Table,
}

impl ArtifactKind {
    pub fn prefix(self) -> &'static str {
        match self {
            ArtifactKind::Figure => label::FIGURE_PREFIX,
            ArtifactKind::Table => label::TABLE_PREFIX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ArtifactPayload {
    Figure { placeholder: String },
    Table { header: Vec<String>, rows: Vec<Vec<String>> },
}

/// A registered figure or table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualArtifact {
    pub kind: ArtifactKind,
    pub label: String,
    /// Semantic description; rendered verbatim as the caption.
    pub description: String,
    pub expected_sections: Vec<String>,
    pub payload: ArtifactPayload,
}

impl VisualArtifact {
    pub fn figure(label: &str, description: &str, sections: &[&str]) -> Self {
        Self {
            kind: ArtifactKind::Figure,
            label: label.to_string(),
            description: description.to_string(),
            expected_sections: sections.iter().map(|s| s.to_string()).collect(),
            payload: ArtifactPayload::Figure { placeholder: format!("[{label}]") },
        }
    }

    pub fn table(label: &str, description: &str, sections: &[&str], header: &[&str], rows: &[&[&str]]) -> Self {
        let own = |r: &[&str]| r.iter().map(|c| c.to_string()).collect::<Vec<_>>();
        Self {
            kind: ArtifactKind::Table,
            label: label.to_string(),
            description: description.to_string(),
            expected_sections: sections.iter().map(|s| s.to_string()).collect(),
            payload: ArtifactPayload::Table {
                header: own(header),
                rows: rows.iter().map(|r| own(r)).collect(),
            },
        }
    }

    /// Check the artifact's own invariants.
    pub fn check(&self) -> Result<(), ContractError> {
        match label_kind(&self.label) {
            None => return Err(ContractError::MalformedLabel(self.label.clone())),
            Some(kind) if kind != self.kind => {
                return Err(ContractError::InvalidArtifact {
                    label: self.label.clone(),
                    reason: format!("label prefix does not match kind `{:?}`", self.kind),
                })
            }
            Some(_) => {}
        }
        let invalid = |reason: &str| ContractError::InvalidArtifact {
            label: self.label.clone(),
            reason: reason.to_string(),
        };
        if self.expected_sections.is_empty() {
            return Err(invalid("expected_sections is empty"));
        }
        match (&self.payload, self.kind) {
            (ArtifactPayload::Figure { .. }, ArtifactKind::Figure) => {}
            (ArtifactPayload::Table { header, rows }, ArtifactKind::Table) => {
                if header.is_empty() {
                    return Err(invalid("table has no header columns"));
                }
                if rows.iter().any(|r| r.len() != header.len()) {
                    return Err(invalid("table is not rectangular"));
                }
            }
            _ => return Err(invalid("payload type does not match kind")),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObligationSet {
    pub section_id: String,
    pub required_artifacts: Vec<String>,
    pub required_citations: Vec<String>,
    pub required_explanations: Vec<String>,
}

impl ObligationSet {
    fn new(section_id: &str) -> Self {
        Self { section_id: section_id.to_string(), ..Self::default() }
    }
}

#[derive(Debug, Error)]
pub enum ContractError {
    #[error("label `{0}` is already registered")]
    DuplicateLabel(String),
    #[error("label `{0}` does not match the label grammar (`fig:`/`tab:` + [a-z0-9_]+)")]
    MalformedLabel(String),
    #[error("label `{0}` is not registered")]
    UnknownLabel(String),
    #[error("artifact `{label}` is invalid: {reason}")]
    InvalidArtifact { label: String, reason: String },
    #[error("citation key `{0}` is malformed")]
    MalformedCitation(String),
    #[error("citation key `{0}` is not in the contract")]
    UnknownCitation(String),
    #[error("section id `{0}` is malformed")]
    MalformedSection(String),
    #[error("delta `{delta}` from `{origin}` targets unknown {target}")]
    UnknownTarget { delta: String, origin: String, target: String },
    #[error("replay diverged at log record {index}: {reason}")]
    ReplayMismatch { index: usize, reason: String },
    #[error("contract JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// The contract at one pipeline stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractState {
    version: u64,
    registry: BTreeMap<String, VisualArtifact>,
    obligations: BTreeMap<String, ObligationSet>,
    rules: BTreeMap<String, ValidationRule>,
    citations: BTreeSet<String>,
    update_log: Vec<LogRecord>,
}

impl Default for ContractState {
    fn default() -> Self {
        Self::new()
    }
}

impl ContractState {
    /// Version 0: empty registry and the four baseline rules at error severity.
    pub fn new() -> Self {
        let rules = RuleKind::BASELINE
            .into_iter()
            .map(ValidationRule::baseline)
            .map(|r| (r.canonical_key(), r))
            .collect();
        Self {
            version: 0,
            registry: BTreeMap::new(),
            obligations: BTreeMap::new(),
            rules,
            citations: BTreeSet::new(),
            update_log: Vec::new(),
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Registered artifacts in lexicographic label order.
    pub fn registry(&self) -> &BTreeMap<String, VisualArtifact> {
        &self.registry
    }

    pub fn artifact(&self, label: &str) -> Option<&VisualArtifact> {
        self.registry.get(label)
    }

    pub fn obligations(&self) -> &BTreeMap<String, ObligationSet> {
        &self.obligations
    }

    pub fn obligation(&self, section: &str) -> Option<&ObligationSet> {
        self.obligations.get(section)
    }

    pub fn rules(&self) -> impl Iterator<Item = &ValidationRule> {
        self.rules.values()
    }

    pub fn rule(&self, key: &str) -> Option<&ValidationRule> {
        self.rules.get(key)
    }

    pub fn citations(&self) -> &BTreeSet<String> {
        &self.citations
    }

    pub fn update_log(&self) -> &[LogRecord] {
        &self.update_log
    }

    /// Section order declared by a `SectionOrderMatchesBlueprint` rule, if any.
    pub fn section_order(&self) -> Option<&[String]> {
        self.rules.values().find_map(|r| match &r.params {
            RuleParams::SectionOrder { sections } => Some(sections.as_slice()),
            _ => None,
        })
    }

    /// Sections holding `label` among their required artifacts.
    pub fn sections_requiring(&self, label: &str) -> Vec<&str> {
        self.obligations
            .values()
            .filter(|o| o.required_artifacts.iter().any(|l| l == label))
            .map(|o| o.section_id.as_str())
            .collect()
    }

    /// Sections that must explain `label`, falling back to where it is
    /// required and then to the artifact's expected sections.
    pub fn explanation_sections(&self, label: &str) -> Vec<String> {
        let explicit: Vec<String> = self
            .obligations
            .values()
            .filter(|o| o.required_explanations.iter().any(|l| l == label))
            .map(|o| o.section_id.clone())
            .collect();
        if !explicit.is_empty() {
            return explicit;
        }
        let required = self.sections_requiring(label);
        if !required.is_empty() {
            return required.into_iter().map(str::to_string).collect();
        }
        self.registry
            .get(label)
            .map(|a| a.expected_sections.clone())
            .unwrap_or_default()
    }

    pub fn known_sections(&self) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = self.obligations.keys().map(String::as_str).collect();
        if let Some(order) = self.section_order() {
            out.extend(order.iter().map(String::as_str));
        }
        for artifact in self.registry.values() {
            out.extend(artifact.expected_sections.iter().map(String::as_str));
        }
        out
    }

    pub fn register_artifact(&self, artifact: VisualArtifact) -> Result<Self, ContractError> {
        self.commit(ContractEvent::RegisterArtifact { artifact }, None)
    }

    /// Require `label` in `section`. Binding an existing pair is a no-op.
    pub fn bind_obligation(&self, section: &str, label: &str) -> Result<Self, ContractError> {
        self.commit(
            ContractEvent::BindObligation { section: section.to_string(), label: label.to_string() },
            None,
        )
    }

    pub fn add_citation(&self, key: &str) -> Result<Self, ContractError> {
        self.commit(ContractEvent::AddCitation { key: key.to_string() }, None)
    }

    pub fn require_citation(&self, section: &str, key: &str) -> Result<Self, ContractError> {
        self.commit(
            ContractEvent::RequireCitation { section: section.to_string(), key: key.to_string() },
            None,
        )
    }

    /// Fold every delta proposed by `feedback` into the contract.
    pub fn update(&self, feedback: &[FeedbackSignal]) -> Result<Self, ContractError> {
        self.apply_deltas(feedback.iter().flat_map(|s| s.deltas.iter()))
    }

    /// Validate, deduplicate by canonical key, order canonically and apply.
    ///
    /// Deltas whose effect is already present do not bump the version. When
    /// several placements for one label compete, the last in canonical order
    /// wins and the superseded keys are noted on its log record.
    pub fn apply_deltas<'a>(
        &self,
        deltas: impl IntoIterator<Item = &'a ContractDelta>,
    ) -> Result<Self, ContractError> {
        let mut batch: Vec<&ContractDelta> = deltas.into_iter().collect();
        for delta in &batch {
            self.check_targets(delta)?;
        }
        let mut keyed: Vec<(u8, String, String, &ContractDelta)> = batch
            .drain(..)
            .map(|d| {
                let tiebreak = canonical::to_canonical_string(d).unwrap_or_default();
                (d.action.rank(), d.canonical_key(), tiebreak, d)
            })
            .collect();
        keyed.sort_by(|a, b| (a.0, &a.1, &a.2).cmp(&(b.0, &b.1, &b.2)));
        keyed.dedup_by(|later, earlier| later.1 == earlier.1);

        // Winning placement per label: last in canonical order.
        let mut placement_winner: BTreeMap<&str, &str> = BTreeMap::new();
        for (_, key, _, d) in &keyed {
            if let DeltaAction::AdjustPlacement { label, .. } = &d.action {
                placement_winner.insert(label.as_str(), key.as_str());
            }
        }
        let mut superseded: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        let mut resolved: Vec<&ContractDelta> = Vec::new();
        for (_, key, _, d) in &keyed {
            let loser = match &d.action {
                DeltaAction::AdjustPlacement { label, .. } => placement_winner
                    .get(label.as_str())
                    .filter(|w| **w != key.as_str())
                    .map(|w| (*w, key.as_str())),
                DeltaAction::AddObligation { label, section } => placement_winner
                    .get(label.as_str())
                    .filter(|w| !w.ends_with(&format!("/{section}")))
                    .map(|w| (*w, key.as_str())),
                _ => None,
            };
            match loser {
                Some((winner, lost)) => superseded.entry(winner).or_default().push(lost),
                None => resolved.push(d),
            }
        }

        let mut next = self.clone();
        for delta in resolved {
            let key = delta.canonical_key();
            let note = superseded
                .get(key.as_str())
                .map(|lost| format!("supersedes {}", lost.join(", ")));
            next = next.commit(ContractEvent::ApplyDelta { delta: delta.clone() }, note)?;
        }
        Ok(next)
    }

    fn check_targets(&self, delta: &ContractDelta) -> Result<(), ContractError> {
        let unknown = |target: String| ContractError::UnknownTarget {
            delta: delta.canonical_key(),
            origin: delta.origin.clone(),
            target,
        };
        if let Some(label) = delta.action.target_label() {
            if !self.registry.contains_key(label) {
                return Err(unknown(format!("label `{label}`")));
            }
        }
        if let Some(section) = delta.action.target_section() {
            if !self.known_sections().contains(section) {
                return Err(unknown(format!("section `{section}`")));
            }
        }
        if let DeltaAction::AddRule { rule } = &delta.action {
            if let RuleParams::SectionOrder { sections } = &rule.params {
                if let Some(bad) = sections.iter().find(|s| !label::is_valid_section_id(s)) {
                    return Err(unknown(format!("section `{bad}`")));
                }
            }
        }
        Ok(())
    }

    /// Apply `event`; when it changes the contract, bump the version and log it.
    fn commit(&self, event: ContractEvent, note: Option<String>) -> Result<Self, ContractError> {
        let mut next = self.clone();
        next.mutate(&event)?;
        if next == *self {
            return Ok(next);
        }
        next.version += 1;
        next.update_log.push(LogRecord { version: next.version, event, note });
        Ok(next)
    }

    fn mutate(&mut self, event: &ContractEvent) -> Result<(), ContractError> {
        match event {
            ContractEvent::RegisterArtifact { artifact } => {
                artifact.check()?;
                if self.registry.contains_key(&artifact.label) {
                    return Err(ContractError::DuplicateLabel(artifact.label.clone()));
                }
                if let Some(bad) = artifact
                    .expected_sections
                    .iter()
                    .find(|s| !label::is_valid_section_id(s))
                {
                    return Err(ContractError::MalformedSection(bad.clone()));
                }
                self.registry.insert(artifact.label.clone(), artifact.clone());
            }
            ContractEvent::BindObligation { section, label } => {
                if !self.registry.contains_key(label) {
                    return Err(ContractError::UnknownLabel(label.clone()));
                }
                push_unique(&mut self.obligation_mut(section)?.required_artifacts, label);
            }
            ContractEvent::RequireCitation { section, key } => {
                if !self.citations.contains(key) {
                    return Err(ContractError::UnknownCitation(key.clone()));
                }
                push_unique(&mut self.obligation_mut(section)?.required_citations, key);
            }
            ContractEvent::AddCitation { key } => {
                if !label::is_valid_cite_key(key) {
                    return Err(ContractError::MalformedCitation(key.clone()));
                }
                self.citations.insert(key.clone());
            }
            ContractEvent::ApplyDelta { delta } => self.mutate_delta(&delta.action)?,
        }
        Ok(())
    }

    fn mutate_delta(&mut self, action: &DeltaAction) -> Result<(), ContractError> {
        match action {
            DeltaAction::AddRule { rule } => {
                self.rules.entry(rule.canonical_key()).or_insert_with(|| rule.clone());
            }
            DeltaAction::RequireExplanation { label } => {
                let rule = ValidationRule::artifact_explained(label.clone(), Severity::Error);
                self.rules.entry(rule.canonical_key()).or_insert(rule);
                let mut sections: Vec<String> =
                    self.sections_requiring(label).into_iter().map(str::to_string).collect();
                if sections.is_empty() {
                    sections = self.registry[label].expected_sections.clone();
                }
                for section in sections {
                    push_unique(&mut self.obligation_mut(&section)?.required_explanations, label);
                }
            }
            DeltaAction::AddObligation { section, label } => {
                push_unique(&mut self.obligation_mut(section)?.required_artifacts, label);
            }
            DeltaAction::AdjustPlacement { label, section } => {
                let had_explanation = self
                    .obligations
                    .values()
                    .any(|o| o.required_explanations.contains(label));
                for set in self.obligations.values_mut().filter(|s| s.section_id != *section) {
                    set.required_artifacts.retain(|l| l != label);
                    set.required_explanations.retain(|l| l != label);
                }
                let target = self.obligation_mut(section)?;
                push_unique(&mut target.required_artifacts, label);
                if had_explanation {
                    push_unique(&mut target.required_explanations, label);
                }
                // Emptied obligation sets and old expected sections stay, so the
                // set of known sections never shrinks and re-application is a no-op.
                if let Some(artifact) = self.registry.get_mut(label) {
                    push_unique(&mut artifact.expected_sections, section);
                }
            }
        }
        Ok(())
    }

    fn obligation_mut(&mut self, section: &str) -> Result<&mut ObligationSet, ContractError> {
        if !label::is_valid_section_id(section) {
            return Err(ContractError::MalformedSection(section.to_string()));
        }
        Ok(self
            .obligations
            .entry(section.to_string())
            .or_insert_with(|| ObligationSet::new(section)))
    }

    /// Rebuild a contract by folding `log` over a fresh contract.
    pub fn replay(log: &[LogRecord]) -> Result<Self, ContractError> {
        let mut state = Self::new();
        for (index, record) in log.iter().enumerate() {
            let next = state.commit(record.event.clone(), record.note.clone())?;
            if next.version != record.version || next.version == state.version {
                return Err(ContractError::ReplayMismatch {
                    index,
                    reason: format!(
                        "record claims version {} but replay reached {}",
                        record.version, next.version
                    ),
                });
            }
            state = next;
        }
        Ok(state)
    }

    /// Canonical JSON (sorted keys), including the update log.
    pub fn to_canonical_json(&self) -> String {
        canonical::to_canonical_string(self).expect("contract state always serializes")
    }

    pub fn to_canonical_file(&self) -> String {
        canonical::to_canonical_file(self).expect("contract state always serializes")
    }

    /// The update log as JSON lines, one record per line.
    pub fn journal_jsonl(&self) -> String {
        self.update_log
            .iter()
            .map(|r| canonical::to_canonical_string(r).expect("log record serializes") + "\n")
            .collect()
    }

    pub fn from_journal_jsonl(text: &str) -> Result<Self, ContractError> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str::<LogRecord>)
            .collect::<Result<Vec<_>, _>>()?;
        Self::replay(&records)
    }

    /// Parse a serialized contract and confirm it is internally consistent.
    pub fn from_json(text: &str) -> Result<Self, ContractError> {
        let state: Self = serde_json::from_str(text)?;
        if let Some(problem) = state.audit().into_iter().next() {
            return Err(ContractError::ReplayMismatch { index: state.update_log.len(), reason: problem });
        }
        Ok(state)
    }

    /// Check global invariants; returns one message per broken invariant.
    pub fn audit(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (key, artifact) in &self.registry {
            if key != &artifact.label {
                problems.push(format!("registry key `{key}` holds artifact `{}`", artifact.label));
            }
            if let Err(e) = artifact.check() {
                problems.push(e.to_string());
            }
        }
        for (section, set) in &self.obligations {
            if section != &set.section_id {
                problems.push(format!("obligation key `{section}` holds `{}`", set.section_id));
            }
            let mut seen = BTreeSet::new();
            for label in set.required_artifacts.iter().chain(&set.required_explanations) {
                if !self.registry.contains_key(label) {
                    problems.push(format!("section `{section}` references unregistered `{label}`"));
                }
            }
            for label in &set.required_artifacts {
                if !seen.insert(label) {
                    problems.push(format!("section `{section}` requires `{label}` twice"));
                }
            }
            for key in &set.required_citations {
                if !self.citations.contains(key) {
                    problems.push(format!("section `{section}` requires unknown citation `{key}`"));
                }
            }
        }
        for (key, rule) in &self.rules {
            if key != &rule.canonical_key() {
                problems.push(format!("rule stored under `{key}` has key `{}`", rule.canonical_key()));
            }
        }
        for kind in RuleKind::BASELINE {
            if !self.rules.contains_key(kind.as_str()) {
                problems.push(format!("baseline rule `{}` missing", kind.as_str()));
            }
        }
        if self.version != self.update_log.len() as u64 {
            problems.push(format!(
                "version {} differs from log length {}",
                self.version,
                self.update_log.len()
            ));
        }
        for (i, record) in self.update_log.iter().enumerate() {
            if record.version != i as u64 + 1 {
                problems.push(format!("log record {i} has version {}", record.version));
            }
        }
        problems
    }
}

fn push_unique(list: &mut Vec<String>, item: &str) {
    if !list.iter().any(|x| x == item) {
        list.push(item.to_string());
    }
}
