use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Architect,
    Write,
    Evaluate,
    Refine,
    Render,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Architect => "architect",
            Stage::Write => "write",
            Stage::Evaluate => "evaluate",
            Stage::Refine => "refine",
            Stage::Render => "render",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JournalEntry {
    pub seq: usize,
    pub stage: Stage,
    /// Section the entry is about (write phase).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section: Option<String>,
    /// Adapt iteration (refine phase).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
    pub version_before: u64,
    pub version_after: u64,
    pub errors: usize,
    pub warnings: usize,
    /// Score per evaluator id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub scores: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// RFC 3339 time, or a zero-padded tick counter under the fixed clock.
    pub timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("journal line {line}: {message}")]
pub struct JournalError {
    pub line: usize,
    pub message: String,
}

/// Append-only record of a pipeline run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunJournal {
    entries: Vec<JournalEntry>,
}

impl RunJournal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[JournalEntry] {
        &self.entries
    }

    /// Append, assigning the next sequence number.
    pub fn push(&mut self, mut entry: JournalEntry) {
        entry.seq = self.entries.len();
        self.entries.push(entry);
    }

    /// Entries whose stage is in `stages`, keeping their sequence numbers.
    pub fn only(&self, stages: &[Stage]) -> Self {
        Self { entries: self.entries.iter().filter(|e| stages.contains(&e.stage)).cloned().collect() }
    }

    pub fn stages(&self) -> Vec<Stage> {
        self.entries.iter().map(|e| e.stage).collect()
    }

    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| canonical::to_canonical_string(e).expect("journal entry serializes") + "\n")
            .collect()
    }

    /// Parse JSON lines; blank lines are skipped and errors name the 1-based line.
    pub fn from_jsonl(text: &str) -> Result<Self, JournalError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: JournalEntry = serde_json::from_str(line)
                .map_err(|e| JournalError { line: i + 1, message: e.to_string() })?;
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    /// Error counts along the adapt trajectory: the summed write-phase
    /// evaluations, each refine-phase evaluation, then each render.
    pub fn error_trajectory(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let write_phase: Vec<&JournalEntry> = self
            .entries
            .iter()
            .filter(|e| e.stage == Stage::Evaluate && e.iteration.is_none())
            .collect();
        if !write_phase.is_empty() {
            out.push(write_phase.iter().map(|e| e.errors).sum());
        }
        for e in &self.entries {
            match (e.stage, e.iteration) {
                (Stage::Evaluate, Some(_)) | (Stage::Render, _) => out.push(e.errors),
                _ => {}
            }
        }
        out
    }

    /// Error counts never rise along the trajectory and contract versions never fall.
    pub fn check_monotone(&self) -> Result<(), String> {
        for pair in self.entries.windows(2) {
            if pair[1].version_before < pair[0].version_after {
                return Err(format!(
                    "contract version falls from {} to {} at entry {}",
                    pair[0].version_after, pair[1].version_before, pair[1].seq
                ));
            }
        }
        let trajectory = self.error_trajectory();
        if let Some(i) = trajectory.windows(2).position(|w| w[1] > w[0]) {
            return Err(format!(
                "error count rises from {} to {} (trajectory {:?})",
                trajectory[i],
                trajectory[i + 1],
                trajectory
            ));
        }
        Ok(())
    }

    /// True when the stage sequence reads: architect, then (write, evaluate)
    /// per section, then one or more (refine, evaluate), then render.
    pub fn follows_algorithm(&self) -> bool {
        let stages = self.stages();
        let mut rest: &[Stage] = &stages;
        let Some((Stage::Architect, tail)) = rest.split_first() else { return false };
        rest = tail;
        let mut writes = 0;
        while let [Stage::Write, Stage::Evaluate, tail @ ..] = rest {
            rest = tail;
            writes += 1;
        }
        let mut refines = 0;
        while let [Stage::Refine, Stage::Evaluate, tail @ ..] = rest {
            rest = tail;
            refines += 1;
        }
        writes > 0 && refines > 0 && rest == [Stage::Render]
    }

    /// Fixed-width table: stage, section/iteration, versions, counts, aggregate.
    pub fn table(&self) -> String {
        let mut out = format!("{:<4} {:<9} {:<14} {:>9} {:>6} {:>8} {:>9}\n", "seq", "stage", "scope", "version", "errors", "warnings", "score");
        for e in &self.entries {
            let scope = match (&e.section, e.iteration) {
                (Some(s), _) => s.clone(),
                (None, Some(i)) => format!("iter {i}"),
                (None, None) => "-".into(),
            };
            let score = e.aggregate.map_or("-".to_string(), |a| format!("{a:.3}"));
            out.push_str(&format!(
                "{:<4} {:<9} {:<14} {:>9} {:>6} {:>8} {:>9}\n",
                e.seq,
                e.stage.as_str(),
                scope,
                format!("{}->{}", e.version_before, e.version_after),
                e.errors,
                e.warnings,
                score
            ));
        }
        out
    }
}

/// Source of journal timestamps.
#[derive(Debug, Clone)]
pub struct Clock {
    fixed: bool,
    tick: u64,
}

impl Clock {
    pub fn system() -> Self {
        Self { fixed: false, tick: 0 }
    }

    /// Deterministic counter in place of wall-clock time.
    pub fn fixed() -> Self {
        Self { fixed: true, tick: 0 }
    }

    pub fn now(&mut self) -> String {
        self.tick += 1;
        if self.fixed {
            format!("{:06}", self.tick)
        } else {
            chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
        }
    }
}
