use serde::{Deserialize, Serialize};

use super::rules::ValidationRule;
use super::VisualArtifact;

/// A discrete change proposed by an evaluator or agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum DeltaAction {
    AddRule { rule: ValidationRule },
    RequireExplanation { label: String },
    AddObligation { section: String, label: String },
    AdjustPlacement { label: String, section: String },
}

impl DeltaAction {
    /// Position in the canonical application order. Explanations come last
    /// because the sections they land in depend on the placements.
    pub fn rank(&self) -> u8 {
        match self {
            DeltaAction::AddRule { .. } => 0,
            DeltaAction::AddObligation { .. } => 1,
            DeltaAction::AdjustPlacement { .. } => 2,
            DeltaAction::RequireExplanation { .. } => 3,
        }
    }

    pub fn canonical_key(&self) -> String {
        match self {
            DeltaAction::AddRule { rule } => format!("add_rule/{}", rule.canonical_key()),
            DeltaAction::RequireExplanation { label } => format!("require_explanation/{label}"),
            DeltaAction::AddObligation { section, label } => {
                format!("add_obligation/{section}/{label}")
            }
            DeltaAction::AdjustPlacement { label, section } => {
                format!("adjust_placement/{label}/{section}")
            }
        }
    }

    /// Artifact label the delta is about, if any.
    pub fn target_label(&self) -> Option<&str> {
        match self {
            DeltaAction::AddRule { rule } => rule.target_label(),
            DeltaAction::RequireExplanation { label }
            | DeltaAction::AddObligation { label, .. }
            | DeltaAction::AdjustPlacement { label, .. } => Some(label),
        }
    }

    pub fn target_section(&self) -> Option<&str> {
        match self {
            DeltaAction::AddObligation { section, .. }
            | DeltaAction::AdjustPlacement { section, .. } => Some(section),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContractDelta {
    #[serde(flatten)]
    pub action: DeltaAction,
    /// Evaluator or agent that proposed the change.
    pub origin: String,
}

impl ContractDelta {
    pub fn new(action: DeltaAction, origin: impl Into<String>) -> Self {
        Self { action, origin: origin.into() }
    }

    pub fn canonical_key(&self) -> String {
        self.action.canonical_key()
    }
}

/// One journaled contract transition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ContractEvent {
    RegisterArtifact { artifact: VisualArtifact },
    BindObligation { section: String, label: String },
    RequireCitation { section: String, key: String },
    AddCitation { key: String },
    ApplyDelta { delta: ContractDelta },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    /// Contract version after this record was applied.
    pub version: u64,
    #[serde(flatten)]
    pub event: ContractEvent,
    /// Conflict resolution note, e.g. superseded placements.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}
