use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::contract::{label, VisualArtifact};
use crate::render::{scan_markers, Marker};
use crate::story::ResearchStory;

/// Architect plan for one manuscript section.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionSpec {
    pub section_id: String,
    pub title: String,
    pub order_index: usize,
    #[serde(default)]
    pub outline: Vec<String>,
    #[serde(default)]
    pub evidence_links: Vec<String>,
    #[serde(default)]
    pub bound_artifacts: Vec<String>,
    /// Citation keys the section must carry.
    #[serde(default)]
    pub required_citations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blueprint {
    pub sections: Vec<SectionSpec>,
    #[serde(default)]
    pub artifact_proposals: Vec<VisualArtifact>,
    #[serde(default)]
    pub citation_proposals: Vec<String>,
}

impl Blueprint {
    /// Sections sorted by `order_index`.
    pub fn ordered_sections(&self) -> Vec<&SectionSpec> {
        let mut out: Vec<&SectionSpec> = self.sections.iter().collect();
        out.sort_by_key(|s| s.order_index);
        out
    }

    pub fn section(&self, id: &str) -> Option<&SectionSpec> {
        self.sections.iter().find(|s| s.section_id == id)
    }

    /// Structural invariants, checked against the story it was built from.
    /// Returns one message per problem.
    pub fn problems(&self, story: &ResearchStory) -> Vec<String> {
        let mut out = Vec::new();
        if self.sections.is_empty() {
            out.push("blueprint has no sections".to_string());
        }
        let mut ids = BTreeSet::new();
        for s in &self.sections {
            if !label::is_valid_section_id(&s.section_id) {
                out.push(format!("section id `{}` is malformed", s.section_id));
            }
            if !ids.insert(s.section_id.as_str()) {
                out.push(format!("section id `{}` is duplicated", s.section_id));
            }
            for link in &s.evidence_links {
                if story.evidence(link).is_none() {
                    out.push(format!("section `{}` links unknown evidence `{link}`", s.section_id));
                }
            }
            for key in &s.required_citations {
                if !self.citation_proposals.contains(key) {
                    out.push(format!("section `{}` requires unproposed citation `{key}`", s.section_id));
                }
            }
        }
        let mut order: Vec<usize> = self.sections.iter().map(|s| s.order_index).collect();
        order.sort_unstable();
        if order.iter().enumerate().any(|(i, o)| i != *o) {
            out.push("order_index values are not a permutation of 0..n".to_string());
        }
        let labels: BTreeSet<&str> = self.artifact_proposals.iter().map(|a| a.label.as_str()).collect();
        for a in &self.artifact_proposals {
            for s in &a.expected_sections {
                if !ids.contains(s.as_str()) {
                    out.push(format!("artifact `{}` expects unknown section `{s}`", a.label));
                }
            }
        }
        for s in &self.sections {
            for l in &s.bound_artifacts {
                if !labels.contains(l.as_str()) {
                    out.push(format!("section `{}` binds unproposed artifact `{l}`", s.section_id));
                }
            }
        }
        let references: BTreeSet<&str> = story.reference_keys().collect();
        for key in &self.citation_proposals {
            if !references.contains(key.as_str()) {
                out.push(format!("citation `{key}` is not among the story's references"));
            }
        }
        out
    }
}

#[derive(Deserialize)]
struct DraftWire {
    section_id: String,
    text: String,
}

/// Writer output for one section. `markers` always reflects `text`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "DraftWire")]
pub struct Draft {
    section_id: String,
    text: String,
    markers: Vec<Marker>,
}

impl From<DraftWire> for Draft {
    fn from(w: DraftWire) -> Self {
        Draft::new(w.section_id, w.text)
    }
}

impl Draft {
    pub fn new(section_id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let markers = scan_markers(&text).markers;
        Self { section_id: section_id.into(), text, markers }
    }

    pub fn section_id(&self) -> &str {
        &self.section_id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn markers(&self) -> &[Marker] {
        &self.markers
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManuscriptSection {
    pub spec: SectionSpec,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manuscript {
    pub title: String,
    pub sections: Vec<ManuscriptSection>,
    pub contract_version_at_freeze: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rendered: Option<String>,
}

impl Manuscript {
    pub fn section_texts(&self) -> impl Iterator<Item = (&str, &str)> {
        self.sections.iter().map(|s| (s.spec.section_id.as_str(), s.text.as_str()))
    }
}

/// Byte ranges of the blank-line separated paragraphs in draft text.
pub fn paragraph_ranges(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut end = 0;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let content_end = offset + line.trim_end().len();
        if line.trim().is_empty() {
            if let Some(s) = start.take() {
                out.push(s..end);
            }
        } else {
            if start.is_none() {
                start = Some(offset + (line.len() - line.trim_start().len()));
            }
            end = content_end;
        }
        offset += line.len();
    }
    if let Some(s) = start {
        out.push(s..end);
    }
    out
}
