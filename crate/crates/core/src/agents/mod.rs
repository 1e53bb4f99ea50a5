//! Role-tagged generation agents.
//!
//! The orchestrator talks to every agent through [`dispatch`], which calls a
//! backend and then gates the response through [`validate_response`]. Two
//! backends ship: [`ScriptedBackend`] reads fixture files, and
//! [`ServiceBackend`] posts JSON to an HTTP endpoint.

mod scripted;
mod service;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::{label, ContractDelta, ContractState};
use crate::evaluate::marker_problem;
use crate::pipeline::{Blueprint, Draft, SectionSpec};
use crate::render::scan_markers;
use crate::story::ResearchStory;

pub use scripted::ScriptedBackend;
pub use service::{ServiceBackend, ServiceConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Architect,
    Writer,
    Refiner,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Architect => "architect",
            Role::Writer => "writer",
            Role::Refiner => "refiner",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AgentInputs {
    Architect { story: ResearchStory },
    Writer { section: SectionSpec },
    Refiner { drafts: Vec<Draft> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentRequest {
    pub role: Role,
    /// Architect: 0. Writer: the section's `order_index`. Refiner: the adapt iteration.
    pub stage_index: usize,
    /// Scenario key; the story id.
    pub scenario: String,
    /// Full contract snapshot at dispatch time.
    pub contract: ContractState,
    pub inputs: AgentInputs,
}

impl AgentRequest {
    pub fn architect(story: &ResearchStory, contract: &ContractState) -> Self {
        Self {
            role: Role::Architect,
            stage_index: 0,
            scenario: story.id.clone(),
            contract: contract.clone(),
            inputs: AgentInputs::Architect { story: story.clone() },
        }
    }

    pub fn writer(scenario: &str, section: &SectionSpec, contract: &ContractState) -> Self {
        Self {
            role: Role::Writer,
            stage_index: section.order_index,
            scenario: scenario.to_string(),
            contract: contract.clone(),
            inputs: AgentInputs::Writer { section: section.clone() },
        }
    }

    pub fn refiner(scenario: &str, iteration: usize, drafts: &[Draft], contract: &ContractState) -> Self {
        Self {
            role: Role::Refiner,
            stage_index: iteration,
            scenario: scenario.to_string(),
            contract: contract.clone(),
            inputs: AgentInputs::Refiner { drafts: drafts.to_vec() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinedSection {
    pub section_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum AgentContent {
    Architect {
        blueprint: Blueprint,
    },
    Writer {
        section_id: String,
        text: String,
    },
    Refiner {
        sections: Vec<RefinedSection>,
        #[serde(default)]
        deltas: Vec<ContractDelta>,
    },
}

impl AgentContent {
    pub fn role(&self) -> Role {
        match self {
            AgentContent::Architect { .. } => Role::Architect,
            AgentContent::Writer { .. } => Role::Writer,
            AgentContent::Refiner { .. } => Role::Refiner,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Usage {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentResponse {
    pub content: AgentContent,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<Usage>,
}

/// A schema problem at a JSON path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaViolation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("backend unavailable after {attempts} attempt(s): {message}")]
    BackendUnavailable { attempts: u32, message: String },
    #[error("malformed {role} response: {}", join_violations(.violations))]
    MalformedResponse { role: Role, violations: Vec<SchemaViolation>, raw: String },
    #[error("no scripted fixture for `{key}`")]
    ScenarioMiss { key: String },
    #[error("backend configuration: {0}")]
    Config(String),
}

fn join_violations(v: &[SchemaViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub trait AgentBackend: Send + Sync {
    /// Produce a response for `req`. Callers go through [`dispatch`].
    fn call(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError>;
}

/// Parse a raw JSON payload as a response for `role`.
pub fn parse_response(raw: &str, role: Role) -> Result<AgentResponse, AgentError> {
    let malformed = |path: String, message: String| AgentError::MalformedResponse {
        role,
        violations: vec![SchemaViolation { path, message }],
        raw: raw.to_string(),
    };
    let mut de = serde_json::Deserializer::from_str(raw);
    let resp: AgentResponse = serde_path_to_error::deserialize(&mut de)
        .map_err(|e| malformed(e.path().to_string(), e.inner().to_string()))?;
    de.end().map_err(|e| malformed(".".into(), e.to_string()))?;
    Ok(resp)
}

/// Call `backend` and gate its response; nothing unvalidated gets through.
pub fn dispatch(backend: &dyn AgentBackend, req: &AgentRequest) -> Result<AgentResponse, AgentError> {
    let resp = backend.call(req)?;
    let violations = validate_response(&resp, req.role);
    if violations.is_empty() {
        tracing::debug!(role = %req.role, stage = req.stage_index, "agent response accepted");
        Ok(resp)
    } else {
        let raw = serde_json::to_string(&resp).unwrap_or_default();
        Err(AgentError::MalformedResponse { role: req.role, violations, raw })
    }
}

fn check_text(path: &str, text: &str, out: &mut Vec<SchemaViolation>) {
    let scan = scan_markers(text);
    for bad in scan.malformed {
        out.push(SchemaViolation {
            path: path.to_string(),
            message: format!("bytes {}..{}: {}", bad.span.start, bad.span.end, bad.reason),
        });
    }
    for m in scan.markers {
        if let Some(problem) = marker_problem(&m) {
            out.push(SchemaViolation { path: path.to_string(), message: problem });
        }
    }
}

fn check_section_id(path: String, id: &str, out: &mut Vec<SchemaViolation>) {
    if !label::is_valid_section_id(id) {
        out.push(SchemaViolation { path, message: format!("section id `{id}` is malformed") });
    }
}

/// Schema check for `role`. Empty exactly when the response is acceptable.
pub fn validate_response(resp: &AgentResponse, role: Role) -> Vec<SchemaViolation> {
    let mut out = Vec::new();
    if resp.content.role() != role {
        out.push(SchemaViolation {
            path: "content.role".into(),
            message: format!("expected `{role}`, got `{}`", resp.content.role()),
        });
        return out;
    }
    match &resp.content {
        AgentContent::Architect { blueprint } => {
            let mut labels = BTreeSet::new();
            for (i, a) in blueprint.artifact_proposals.iter().enumerate() {
                let path = format!("content.blueprint.artifact_proposals[{i}]");
                if !labels.insert(a.label.as_str()) {
                    out.push(SchemaViolation {
                        path: format!("{path}.label"),
                        message: format!("label `{}` is proposed twice", a.label),
                    });
                } else if let Err(e) = a.check() {
                    out.push(SchemaViolation { path, message: e.to_string() });
                }
            }
            for (i, s) in blueprint.sections.iter().enumerate() {
                check_section_id(format!("content.blueprint.sections[{i}].section_id"), &s.section_id, &mut out);
                for (j, l) in s.bound_artifacts.iter().enumerate() {
                    if !label::is_valid_label(l) {
                        out.push(SchemaViolation {
                            path: format!("content.blueprint.sections[{i}].bound_artifacts[{j}]"),
                            message: format!("label `{l}` does not match the label grammar"),
                        });
                    }
                }
                for (j, o) in s.outline.iter().enumerate() {
                    check_text(&format!("content.blueprint.sections[{i}].outline[{j}]"), o, &mut out);
                }
            }
            for (i, key) in blueprint.citation_proposals.iter().enumerate() {
                if !label::is_valid_cite_key(key) {
                    out.push(SchemaViolation {
                        path: format!("content.blueprint.citation_proposals[{i}]"),
                        message: format!("citation key `{key}` is malformed"),
                    });
                }
            }
        }
        AgentContent::Writer { section_id, text } => {
            check_section_id("content.section_id".into(), section_id, &mut out);
            check_text("content.text", text, &mut out);
        }
        AgentContent::Refiner { sections, deltas } => {
            for (i, s) in sections.iter().enumerate() {
                check_section_id(format!("content.sections[{i}].section_id"), &s.section_id, &mut out);
                check_text(&format!("content.sections[{i}].text"), &s.text, &mut out);
            }
            for (i, d) in deltas.iter().enumerate() {
                if let Some(l) = d.action.target_label().filter(|l| !label::is_valid_label(l)) {
                    out.push(SchemaViolation {
                        path: format!("content.deltas[{i}]"),
                        message: format!("label `{l}` does not match the label grammar"),
                    });
                }
                if let Some(s) = d.action.target_section() {
                    check_section_id(format!("content.deltas[{i}].section"), s, &mut out);
                }
            }
        }
    }
    out
}
