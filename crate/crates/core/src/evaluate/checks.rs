//! Built-in deterministic evaluators.

use std::collections::BTreeSet;

use rust_decimal::Decimal;

use super::{rule_score, Artifact, Dimension, Evaluator, FeedbackSignal, Issue};
use crate::contract::{
    label, ContractDelta, ContractState, DeltaAction, Location, Severity,
    ValidationRule, MIN_EXPLANATION_WORDS,
};
use crate::decimal;
use crate::pipeline::paragraph_ranges;
use crate::render::{scan_markers, Marker, MarkerKind};
use crate::story::{extract_numbers, ResearchStory};

fn issue(code: &str, severity: Severity, section: &str, subject: Option<&str>, message: String) -> Issue {
    Issue {
        code: code.to_string(),
        severity,
        location: Location { section: Some(section.to_string()), span: None },
        subject: subject.map(str::to_string),
        message,
    }
}

fn signal(
    id: &str,
    dimension: Dimension,
    issues: Vec<Issue>,
    deltas: Vec<ContractDelta>,
    checked: usize,
) -> FeedbackSignal {
    FeedbackSignal {
        evaluator_id: id.to_string(),
        dimension,
        score: rule_score(&issues, checked),
        issues,
        deltas,
        confidence: Decimal::ONE,
    }
}

/// Prose word count of a draft paragraph; figure/table markers read as one
/// word ("Figure"/"Table") and citation markers as none, matching what the
/// renderer emits.
fn draft_words(paragraph: &str) -> usize {
    let mut plain = String::with_capacity(paragraph.len());
    let mut pos = 0;
    for m in scan_markers(paragraph).markers {
        plain.push_str(&paragraph[pos..m.span.start]);
        plain.push_str(match m.kind {
            MarkerKind::Figure => " Figure ",
            MarkerKind::Table => " Table ",
            MarkerKind::Cite => " ",
        });
        pos = m.span.end;
    }
    plain.push_str(&paragraph[pos..]);
    plain
        .split_whitespace()
        .filter(|w| w.chars().any(char::is_alphanumeric))
        .count()
}

/// Checks that each section carries the visual markers its obligations demand
/// and that they come with an explanatory paragraph.
pub struct VisualConsistency;

impl VisualConsistency {
    pub const ID: &'static str = "visual_consistency";
}

impl Evaluator for VisualConsistency {
    fn id(&self) -> &str {
        Self::ID
    }

    fn dimension(&self) -> Dimension {
        Dimension::VisualCommunication
    }

    fn evaluate(&self, x: Artifact<'_>, c: &ContractState, _story: &ResearchStory) -> FeedbackSignal {
        let sections = x.sections();
        let mut issues = Vec::new();
        let mut deltas = Vec::new();
        let mut checked = 0;
        for &(section, text) in &sections {
            let markers: Vec<Marker> = scan_markers(text).markers.into_iter().filter(Marker::is_visual).collect();
            for m in &markers {
                if c.artifact(&m.label).is_none() {
                    checked += 1;
                    issues.push(issue(
                        "UnknownVisualMarker",
                        Severity::Error,
                        section,
                        Some(&m.label),
                        format!("marker references unregistered `{}`", m.label),
                    ));
                }
            }
            let Some(obligations) = c.obligation(section) else { continue };
            for required in &obligations.required_artifacts {
                checked += 1;
                if !markers.iter().any(|m| &m.label == required) {
                    // Placed elsewhere in the document: move the obligation there.
                    let elsewhere = sections.iter().find(|(other, t)| {
                        *other != section
                            && scan_markers(t).markers.iter().any(|m| &m.label == required)
                    });
                    let action = match elsewhere {
                        Some((other, _)) => DeltaAction::AdjustPlacement {
                            label: required.clone(),
                            section: other.to_string(),
                        },
                        None => DeltaAction::AddObligation {
                            section: section.to_string(),
                            label: required.clone(),
                        },
                    };
                    issues.push(issue(
                        "MissingVisualMarker",
                        Severity::Error,
                        section,
                        Some(required),
                        format!("section `{section}` must place `{required}` but has no marker for it"),
                    ));
                    deltas.push(ContractDelta::new(action, Self::ID));
                    continue;
                }
                let explained = paragraph_ranges(text).into_iter().any(|r| {
                    let p = &text[r];
                    draft_words(p) >= MIN_EXPLANATION_WORDS
                        && scan_markers(p).markers.iter().any(|m| &m.label == required)
                });
                if explained {
                    continue;
                }
                let demanded = c
                    .rule(&ValidationRule::artifact_explained(required.clone(), Severity::Error).canonical_key())
                    .is_some()
                    && c.explanation_sections(required).iter().any(|s| s == section);
                if demanded {
                    issues.push(issue(
                        "UnexplainedArtifact",
                        Severity::Error,
                        section,
                        Some(required),
                        format!("`{required}` needs a paragraph of at least {MIN_EXPLANATION_WORDS} words around its marker"),
                    ));
                } else {
                    issues.push(issue(
                        "UnexplainedArtifact",
                        Severity::Warning,
                        section,
                        Some(required),
                        format!("`{required}` is referenced without a descriptive paragraph"),
                    ));
                    deltas.push(ContractDelta::new(
                        DeltaAction::RequireExplanation { label: required.clone() },
                        Self::ID,
                    ));
                }
            }
        }
        signal(Self::ID, self.dimension(), issues, deltas, checked)
    }
}

/// Decimal literals (`-?[0-9]+\.[0-9]+`) in prose, with markers removed.
pub fn numeric_literals(text: &str) -> Vec<&str> {
    let mut masked: Vec<u8> = text.as_bytes().to_vec();
    for m in scan_markers(text).markers {
        masked[m.span.start..m.span.end].fill(b' ');
    }
    let digits_from = |mut i: usize| {
        while i < masked.len() && masked[i].is_ascii_digit() {
            i += 1;
        }
        i
    };
    let mut out = Vec::new();
    let mut i = 0;
    while i < masked.len() {
        let start = i;
        let first_digit = if masked[i] == b'-' { i + 1 } else { i };
        if first_digit >= masked.len() || !masked[first_digit].is_ascii_digit() {
            i += 1;
            continue;
        }
        let int_end = digits_from(first_digit);
        if int_end + 1 < masked.len() && masked[int_end] == b'.' && masked[int_end + 1].is_ascii_digit() {
            let end = digits_from(int_end + 1);
            out.push(&text[start..end]);
            i = end;
        } else {
            i = int_end;
        }
    }
    out
}

/// Numbers quoted in prose must come from the story's evidence.
pub struct DataFidelity;

impl DataFidelity {
    pub const ID: &'static str = "data_fidelity";
}

impl Evaluator for DataFidelity {
    fn id(&self) -> &str {
        Self::ID
    }

    fn dimension(&self) -> Dimension {
        Dimension::ExperimentalSubstance
    }

    fn evaluate(&self, x: Artifact<'_>, _c: &ContractState, story: &ResearchStory) -> FeedbackSignal {
        let known = extract_numbers(story);
        let mut issues = Vec::new();
        let mut checked = 0;
        for (section, text) in x.sections() {
            for literal in numeric_literals(text) {
                checked += 1;
                let value = decimal::parse_literal(literal).map(decimal::canonical);
                if !value.is_some_and(|v| known.contains(&v)) {
                    issues.push(issue(
                        "UnsupportedNumber",
                        Severity::Warning,
                        section,
                        Some(literal),
                        format!("`{literal}` does not appear in the story's evidence"),
                    ));
                }
            }
        }
        signal(Self::ID, self.dimension(), issues, Vec::new(), checked)
    }
}

/// Section presence and order against the blueprint order recorded in the contract.
pub struct Structure;

impl Structure {
    pub const ID: &'static str = "structure";
}

impl Evaluator for Structure {
    fn id(&self) -> &str {
        Self::ID
    }

    fn dimension(&self) -> Dimension {
        Dimension::StructuralIntegrity
    }

    fn evaluate(&self, x: Artifact<'_>, c: &ContractState, _story: &ResearchStory) -> FeedbackSignal {
        let sections = x.sections();
        let mut issues = Vec::new();
        let mut checked = 0;
        for (section, text) in &sections {
            checked += 1;
            if text.trim().is_empty() {
                issues.push(issue("EmptySection", Severity::Warning, section, Some(section), format!("section `{section}` is empty")));
            }
        }
        if let Some(order) = c.section_order() {
            let expected: BTreeSet<&str> = order.iter().map(String::as_str).collect();
            for (section, _) in &sections {
                if !expected.contains(section) {
                    checked += 1;
                    issues.push(issue("UnknownSection", Severity::Error, section, Some(section), format!("section `{section}` is not in the blueprint")));
                }
            }
            if x.is_complete() {
                checked += order.len();
                let present: Vec<&str> = sections.iter().map(|(s, _)| *s).collect();
                for want in order {
                    if !present.contains(&want.as_str()) {
                        issues.push(issue("MissingSection", Severity::Error, want, Some(want), format!("section `{want}` is missing")));
                    }
                }
                let common: Vec<&str> = present.iter().copied().filter(|s| expected.contains(s)).collect();
                let wanted: Vec<&str> = order.iter().map(String::as_str).filter(|s| common.contains(s)).collect();
                if common != wanted {
                    let first = common.first().copied().unwrap_or_default();
                    issues.push(issue(
                        "SectionOrder",
                        Severity::Error,
                        first,
                        None,
                        format!("sections appear as [{}] but the blueprint orders them [{}]", common.join(", "), wanted.join(", ")),
                    ));
                }
            }
        }
        signal(Self::ID, self.dimension(), issues, Vec::new(), checked)
    }
}

/// Citation markers must name contract citations; required citations must appear.
pub struct CitationHygiene;

impl CitationHygiene {
    pub const ID: &'static str = "citation_hygiene";
}

impl Evaluator for CitationHygiene {
    fn id(&self) -> &str {
        Self::ID
    }

    fn dimension(&self) -> Dimension {
        Dimension::CitationHygiene
    }

    fn evaluate(&self, x: Artifact<'_>, c: &ContractState, _story: &ResearchStory) -> FeedbackSignal {
        let mut issues = Vec::new();
        let mut checked = 0;
        for (section, text) in x.sections() {
            let cites: Vec<Marker> = scan_markers(text)
                .markers
                .into_iter()
                .filter(|m| m.kind == MarkerKind::Cite)
                .collect();
            for m in &cites {
                checked += 1;
                if !c.citations().contains(&m.label) {
                    issues.push(issue("UnknownCitation", Severity::Error, section, Some(&m.label), format!("citation `{}` is not in the contract", m.label)));
                }
            }
            if let Some(obligations) = c.obligation(section) {
                for key in &obligations.required_citations {
                    checked += 1;
                    if !cites.iter().any(|m| &m.label == key) {
                        issues.push(issue("MissingCitation", Severity::Warning, section, Some(key), format!("section `{section}` should cite `{key}`")));
                    }
                }
            }
        }
        signal(Self::ID, self.dimension(), issues, Vec::new(), checked)
    }
}

/// Marker well-formedness and stray LaTeX in prose.
pub struct Formatting;

impl Formatting {
    pub const ID: &'static str = "formatting";
}

impl Evaluator for Formatting {
    fn id(&self) -> &str {
        Self::ID
    }

    fn dimension(&self) -> Dimension {
        Dimension::FormattingStability
    }

    fn evaluate(&self, x: Artifact<'_>, _c: &ContractState, _story: &ResearchStory) -> FeedbackSignal {
        let mut issues = Vec::new();
        let mut checked = 0;
        for (section, text) in x.sections() {
            let scan = scan_markers(text);
            checked += 1 + scan.markers.len() + scan.malformed.len();
            for bad in &scan.malformed {
                issues.push(issue("MalformedMarker", Severity::Error, section, None, bad.reason.clone()));
            }
            for m in &scan.markers {
                if let Some(problem) = marker_problem(m) {
                    issues.push(issue("MalformedMarker", Severity::Error, section, Some(&m.label), problem));
                }
            }
            if text.contains('\\') {
                issues.push(issue("RawLatex", Severity::Warning, section, None, "prose contains a backslash; it will be rendered literally".into()));
            }
        }
        signal(Self::ID, self.dimension(), issues, Vec::new(), checked)
    }
}

/// Why a well-delimited marker is still unacceptable, if it is.
pub(crate) fn marker_problem(m: &Marker) -> Option<String> {
    match m.kind {
        MarkerKind::Cite => (!label::is_valid_cite_key(&m.label))
            .then(|| format!("citation key `{}` is malformed", m.label)),
        MarkerKind::Figure | MarkerKind::Table => {
            let want = if m.kind == MarkerKind::Figure { label::FIGURE_PREFIX } else { label::TABLE_PREFIX };
            if !label::is_valid_label(&m.label) {
                Some(format!("label `{}` does not match the label grammar", m.label))
            } else if !m.label.starts_with(want) {
                Some(format!("{} marker carries `{}`, expected a `{want}` label", m.kind.token(), m.label))
            } else {
                None
            }
        }
    }
}

/// Slot for a dimension without a deterministic check: full score, zero confidence.
pub struct PassThrough {
    id: String,
    dimension: Dimension,
}

impl PassThrough {
    pub fn new(id: &str, dimension: Dimension) -> Self {
        Self { id: id.to_string(), dimension }
    }
}

impl Evaluator for PassThrough {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> Dimension {
        self.dimension
    }

    fn evaluate(&self, _x: Artifact<'_>, _c: &ContractState, _story: &ResearchStory) -> FeedbackSignal {
        FeedbackSignal {
            evaluator_id: self.id.clone(),
            dimension: self.dimension,
            score: Decimal::TEN,
            issues: Vec::new(),
            deltas: Vec::new(),
            confidence: Decimal::ZERO,
        }
    }
}
