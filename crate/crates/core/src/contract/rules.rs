use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    LabelUnique,
    RefResolves,
    CiteResolves,
    ArtifactPlacedOnce,
    ArtifactExplained,
    SectionOrderMatchesBlueprint,
}

impl RuleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::LabelUnique => "label_unique",
            RuleKind::RefResolves => "ref_resolves",
            RuleKind::CiteResolves => "cite_resolves",
            RuleKind::ArtifactPlacedOnce => "artifact_placed_once",
            RuleKind::ArtifactExplained => "artifact_explained",
            RuleKind::SectionOrderMatchesBlueprint => "section_order_matches_blueprint",
        }
    }

    /// Rules present in every contract from version 0.
    pub const BASELINE: [RuleKind; 4] = [
        RuleKind::LabelUnique,
        RuleKind::RefResolves,
        RuleKind::CiteResolves,
        RuleKind::ArtifactPlacedOnce,
    ];
}

/// Kind-specific rule parameters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RuleParams {
    None,
    /// Target artifact label.
    Label { label: String },
    /// Expected section ids, in order.
    SectionOrder { sections: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ValidationRule {
    pub kind: RuleKind,
    pub params: RuleParams,
    pub severity: Severity,
}

impl ValidationRule {
    pub fn baseline(kind: RuleKind) -> Self {
        Self { kind, params: RuleParams::None, severity: Severity::Error }
    }

    pub fn artifact_explained(label: impl Into<String>, severity: Severity) -> Self {
        Self {
            kind: RuleKind::ArtifactExplained,
            params: RuleParams::Label { label: label.into() },
            severity,
        }
    }

    pub fn section_order(sections: Vec<String>, severity: Severity) -> Self {
        Self {
            kind: RuleKind::SectionOrderMatchesBlueprint,
            params: RuleParams::SectionOrder { sections },
            severity,
        }
    }

    /// Deterministic identity of the rule; severity is not part of it.
    pub fn canonical_key(&self) -> String {
        canonical_key(self.kind, &self.params)
    }

    pub fn target_label(&self) -> Option<&str> {
        match &self.params {
            RuleParams::Label { label } => Some(label),
            _ => None,
        }
    }
}

pub fn canonical_key(kind: RuleKind, params: &RuleParams) -> String {
    match params {
        RuleParams::None => kind.as_str().to_string(),
        RuleParams::Label { label } => format!("{}:{label}", kind.as_str()),
        RuleParams::SectionOrder { sections } => format!("{}:{}", kind.as_str(), sections.join(",")),
    }
}
