//! Contract rules checked against a scanned LaTeX document.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{label, ContractState, RuleKind, RuleParams, Severity};
use crate::render::{ScannedDocument, Span};

/// Minimum word count for a paragraph to count as explaining an artifact.
pub const MIN_EXPLANATION_WORDS: usize = 12;

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub section: Option<String>,
    pub span: Option<Span>,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.section.as_deref().unwrap_or("-"))?;
        if let Some(span) = self.span {
            write!(f, "@{}..{}", span.start, span.end)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule_key: String,
    pub severity: Severity,
    /// Label, citation key or section list the violation is about.
    pub subject: String,
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}\t{}", self.severity, self.location, self.rule_key, self.message)
    }
}

struct Checker<'a> {
    contract: &'a ContractState,
    doc: &'a ScannedDocument,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn severity(&self, key: &str) -> Severity {
        self.contract.rule(key).map_or(Severity::Error, |r| r.severity)
    }

    fn at_span(&mut self, key: &str, subject: &str, span: Span, message: String) {
        let section = self
            .doc
            .section_at(span.start)
            .map(|i| self.doc.sections[i].id().to_string());
        self.out.push(Violation {
            rule_key: key.to_string(),
            severity: self.severity(key),
            subject: subject.to_string(),
            location: Location { section, span: Some(span) },
            message,
        });
    }

    fn at_section(&mut self, key: &str, subject: &str, section: Option<&str>, message: String) {
        self.out.push(Violation {
            rule_key: key.to_string(),
            severity: self.severity(key),
            subject: subject.to_string(),
            location: Location { section: section.map(str::to_string), span: None },
            message,
        });
    }

    fn label_unique(&mut self) {
        let key = RuleKind::LabelUnique.as_str();
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for l in &self.doc.labels {
            let n = counts.entry(&l.label).or_default();
            *n += 1;
            if *n == 2 {
                self.at_span(key, &l.label, l.span, format!("label `{}` is defined more than once", l.label));
            }
        }
    }

    fn ref_resolves(&mut self) {
        let key = RuleKind::RefResolves.as_str();
        let defined: BTreeSet<&str> = self.doc.labels.iter().map(|l| l.label.as_str()).collect();
        for r in &self.doc.refs {
            let is_artifact =
                r.label.starts_with(label::FIGURE_PREFIX) || r.label.starts_with(label::TABLE_PREFIX);
            if !defined.contains(r.label.as_str()) {
                self.at_span(key, &r.label, r.span, format!("`\\ref{{{}}}` has no matching `\\label`", r.label));
            } else if is_artifact && self.contract.artifact(&r.label).is_none() {
                self.at_span(key, &r.label, r.span, format!("`\\ref{{{}}}` targets an unregistered artifact", r.label));
            }
        }
    }

    fn cite_resolves(&mut self) {
        let key = RuleKind::CiteResolves.as_str();
        for c in &self.doc.cites {
            if !self.contract.citations().contains(&c.key) {
                self.at_span(key, &c.key, c.span, format!("citation `{}` is not in the contract", c.key));
            }
        }
    }

    fn section_refs(&self, section: &str, label: &str, min_words: usize) -> bool {
        self.doc
            .sections
            .iter()
            .filter(|s| s.id() == section)
            .flat_map(|s| &s.paragraphs)
            .any(|p| p.words >= min_words && p.refs.iter().any(|r| r == label))
    }

    fn artifact_placed_once(&mut self) {
        let key = RuleKind::ArtifactPlacedOnce.as_str();
        let mut placed: BTreeMap<&str, usize> = BTreeMap::new();
        for env in &self.doc.environments {
            if let Some(l) = &env.label {
                let n = placed.entry(l).or_default();
                *n += 1;
                if *n == 2 {
                    self.at_span(key, l, env.span, format!("artifact `{l}` is placed more than once"));
                }
            }
        }
        for l in self.contract.registry().keys() {
            if !placed.contains_key(l.as_str()) {
                self.at_section(key, l, None, format!("artifact `{l}` is never placed"));
            }
        }
        for (section, set) in self.contract.obligations() {
            for l in &set.required_artifacts {
                if !self.section_refs(section, l, 0) {
                    self.at_section(
                        key,
                        l,
                        Some(section),
                        format!("artifact `{l}` is not referenced in section `{section}`"),
                    );
                }
            }
        }
    }

    fn artifact_explained(&mut self) {
        let rules: Vec<(String, String)> = self
            .contract
            .rules()
            .filter(|r| r.kind == RuleKind::ArtifactExplained)
            .filter_map(|r| r.target_label().map(|l| (r.canonical_key(), l.to_string())))
            .collect();
        for (key, l) in rules {
            for section in self.contract.explanation_sections(&l) {
                if !self.section_refs(&section, &l, MIN_EXPLANATION_WORDS) {
                    self.at_section(
                        &key,
                        &l,
                        Some(&section),
                        format!(
                            "no paragraph in section `{section}` explains `{l}` (needs a `\\ref` and at least {MIN_EXPLANATION_WORDS} words)"
                        ),
                    );
                }
            }
        }
    }

    fn section_order(&mut self) {
        let rules: Vec<(String, Vec<String>)> = self
            .contract
            .rules()
            .filter_map(|r| match &r.params {
                RuleParams::SectionOrder { sections } => Some((r.canonical_key(), sections.clone())),
                _ => None,
            })
            .collect();
        for (key, expected) in rules {
            let found = self.doc.section_ids();
            if found != expected {
                self.at_section(
                    &key,
                    &expected.join(","),
                    None,
                    format!("section order [{}] differs from blueprint [{}]", found.join(", "), expected.join(", ")),
                );
            }
        }
    }

    fn rank(&self, v: &Violation) -> (usize, usize) {
        let section_rank = match (&v.location.span, &v.location.section) {
            (Some(span), _) => self.doc.section_at(span.start).map_or(0, |i| i + 1),
            (None, Some(section)) => self.doc.section_index(section).map_or(usize::MAX, |i| i + 1),
            (None, None) => usize::MAX,
        };
        (section_rank, v.location.span.map_or(usize::MAX, |s| s.start))
    }
}

/// Check every contract rule (plus the always-on baseline) against `doc`.
///
/// Output is ordered by section, then position, then rule key. It is empty
/// exactly when the document satisfies the contract.
pub fn validate_document(contract: &ContractState, doc: &ScannedDocument) -> Vec<Violation> {
    let mut checker = Checker { contract, doc, out: Vec::new() };
    checker.label_unique();
    checker.ref_resolves();
    checker.cite_resolves();
    checker.artifact_placed_once();
    checker.artifact_explained();
    checker.section_order();
    let mut out = std::mem::take(&mut checker.out);
    out.sort_by(|a, b| {
        let (ra, rb) = (checker.rank(a), checker.rank(b));
        ra.cmp(&rb)
            .then_with(|| a.rule_key.cmp(&b.rule_key))
            .then_with(|| a.subject.cmp(&b.subject))
            .then_with(|| a.location.cmp(&b.location))
    });
    out
}
