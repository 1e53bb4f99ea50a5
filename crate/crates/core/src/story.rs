//! The input research story: narrative blocks, evidence and references.
//!
//! Stories are JSON documents with `schema_version: 1`. Objects may carry a
//! `"$comment"` key anywhere; it is ignored. The shipped schema lives in
//! `schemas/story.schema.json`.

use std::collections::{BTreeSet, HashMap};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decimal;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NarrativeTag {
    Motivation,
    Method,
    Results,
    Context,
}

impl NarrativeTag {
    pub fn as_str(self) -> &'static str {
        match self {
            NarrativeTag::Motivation => "motivation",
            NarrativeTag::Method => "method",
            NarrativeTag::Results => "results",
            NarrativeTag::Context => "context",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NarrativeBlock {
    pub tag: NarrativeTag,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvidenceBody {
    MeasurementTable {
        header: Vec<String>,
        rows: Vec<Vec<String>>,
    },
    Claim {
        statement: String,
        #[serde(with = "decimal::vec")]
        values: Vec<Decimal>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub id: String,
    #[serde(flatten)]
    pub body: EvidenceBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceEntry {
    pub key: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResearchStory {
    pub schema_version: u32,
    pub id: String,
    pub title: String,
    pub narrative: Vec<NarrativeBlock>,
    #[serde(default)]
    pub evidence: Vec<EvidenceRecord>,
    #[serde(default)]
    pub references: Vec<ReferenceEntry>,
}

#[derive(Debug, Error)]
pub enum StoryError {
    #[error("story is not valid UTF-8")]
    Encoding,
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("story has no narrative block tagged `{tag}`")]
    Completeness { tag: &'static str },
    #[error("duplicate key `{key}` at `{path}`")]
    DuplicateKey { key: String, path: String },
}

impl ResearchStory {
    pub fn reference_keys(&self) -> impl Iterator<Item = &str> {
        self.references.iter().map(|r| r.key.as_str())
    }

    pub fn evidence(&self, id: &str) -> Option<&EvidenceRecord> {
        self.evidence.iter().find(|e| e.id == id)
    }

    pub fn to_json(&self) -> String {
        crate::canonical::to_canonical_file(self).expect("story serializes")
    }

    /// Check completeness and uniqueness invariants.
    pub fn check(&self) -> Result<(), StoryError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(StoryError::Schema {
                path: "schema_version".into(),
                message: format!("expected {SCHEMA_VERSION}, found {}", self.schema_version),
            });
        }
        for tag in [NarrativeTag::Motivation, NarrativeTag::Method] {
            if !self.narrative.iter().any(|b| b.tag == tag) {
                return Err(StoryError::Completeness { tag: tag.as_str() });
            }
        }
        let mut seen = HashMap::new();
        for (i, r) in self.references.iter().enumerate() {
            if seen.insert(r.key.as_str(), i).is_some() {
                return Err(StoryError::DuplicateKey {
                    key: r.key.clone(),
                    path: format!("references[{i}].key"),
                });
            }
        }
        let mut seen = HashMap::new();
        for (i, e) in self.evidence.iter().enumerate() {
            if seen.insert(e.id.as_str(), i).is_some() {
                return Err(StoryError::DuplicateKey {
                    key: e.id.clone(),
                    path: format!("evidence[{i}].id"),
                });
            }
            if let EvidenceBody::MeasurementTable { header, rows } = &e.body {
                if let Some(r) = rows.iter().position(|row| row.len() != header.len()) {
                    return Err(StoryError::Schema {
                        path: format!("evidence[{i}].rows[{r}]"),
                        message: format!(
                            "row has {} cells but the header has {}",
                            rows[r].len(),
                            header.len()
                        ),
                    });
                }
            }
        }
        Ok(())
    }
}

fn strip_comments(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.remove("$comment");
            map.values_mut().for_each(strip_comments);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_comments),
        _ => {}
    }
}

/// Parse and validate a story from raw bytes.
pub fn parse_story(input: &[u8]) -> Result<ResearchStory, StoryError> {
    let text = std::str::from_utf8(input).map_err(|_| StoryError::Encoding)?;
    let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| StoryError::Schema {
        path: "$".into(),
        message: e.to_string(),
    })?;
    strip_comments(&mut value);
    let story: ResearchStory = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        StoryError::Schema { path, message: e.into_inner().to_string() }
    })?;
    story.check()?;
    Ok(story)
}

/// Every number in the structured evidence: numeric table cells plus claim
/// values, rounded to six fractional digits. Narrative prose is not read.
pub fn extract_numbers(story: &ResearchStory) -> BTreeSet<Decimal> {
    let mut out = BTreeSet::new();
    for record in &story.evidence {
        match &record.body {
            EvidenceBody::MeasurementTable { header, rows } => {
                for cell in header.iter().chain(rows.iter().flatten()) {
                    if let Some(n) = decimal::parse_literal(cell.trim()) {
                        out.insert(decimal::canonical(n));
                    }
                }
            }
            EvidenceBody::Claim { values, .. } => {
                out.extend(values.iter().copied().map(decimal::canonical));
            }
        }
    }
    out
}

/// A commented template for `msgen init`.
pub fn template() -> String {
    let value = serde_json::json!({
        "$comment": "Research story for msgen. Narrative needs at least one `motivation` and one `method` block.",
        "schema_version": SCHEMA_VERSION,
        "id": "my_story",
        "title": "Working title of the manuscript",
        "narrative": [
            {"$comment": "tag: motivation | method | results | context", "tag": "motivation", "body": "Why this problem matters."},
            {"tag": "method", "body": "What was built and how it works."},
            {"tag": "results", "body": "What the experiments showed."}
        ],
        "evidence": [
            {"$comment": "Numeric cells feed the data-fidelity check.", "id": "main_results", "kind": "measurement_table",
             "header": ["setting", "score"], "rows": [["baseline", "3.96"], ["ours", "6.15"]]},
            {"id": "headline", "kind": "claim", "statement": "Ours improves on the baseline.", "values": [2.18]}
        ],
        "references": [
            {"$comment": "Keys are cited in drafts as [[CITE:key]].", "key": "smith2024", "text": "Smith et al. 2024."}
        ]
    });
    crate::canonical::to_canonical_file(&value).expect("template serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::str::FromStr;

    fn minimal() -> serde_json::Value {
        serde_json::json!({
            "schema_version": 1,
            "id": "s",
            "title": "T",
            "narrative": [
                {"tag": "motivation", "body": "why"},
                {"tag": "method", "body": "how"}
            ]
        })
    }

    fn parse(v: &serde_json::Value) -> Result<ResearchStory, StoryError> {
        parse_story(v.to_string().as_bytes())
    }

    #[test]
    fn minimal_story_parses() {
        let s = parse(&minimal()).unwrap();
        assert_eq!(s.narrative.len(), 2);
        assert!(extract_numbers(&s).is_empty());
    }

    #[test]
    fn missing_method_names_tag() {
        let mut v = minimal();
        v["narrative"].as_array_mut().unwrap().remove(1);
        let err = parse(&v).unwrap_err();
        assert!(matches!(err, StoryError::Completeness { tag: "method" }), "{err}");
    }

    #[test]
    fn duplicate_cite_key_reports_second_path() {
        let mut v = minimal();
        v["references"] = serde_json::json!([
            {"key": "smith2024", "text": "a"},
            {"key": "other", "text": "b"},
            {"key": "smith2024", "text": "c"}
        ]);
        match parse(&v).unwrap_err() {
            StoryError::DuplicateKey { key, path } => {
                assert_eq!(key, "smith2024");
                assert_eq!(path, "references[2].key");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn schema_errors_carry_paths() {
        let mut v = minimal();
        v["narrative"][1]["tag"] = serde_json::json!("conclusion");
        match parse(&v).unwrap_err() {
            StoryError::Schema { path, .. } => assert_eq!(path, "narrative[1].tag"),
            other => panic!("unexpected {other}"),
        }
        let mut v = minimal();
        v.as_object_mut().unwrap().remove("title");
        assert!(matches!(parse(&v), Err(StoryError::Schema { .. })));
        assert!(matches!(parse_story(b"\xff"), Err(StoryError::Encoding)));
        assert!(matches!(parse_story(b"{"), Err(StoryError::Schema { .. })));
    }

    #[test]
    fn ragged_table_rejected() {
        let mut v = minimal();
        v["evidence"] = serde_json::json!([
            {"id": "t", "kind": "measurement_table", "header": ["a", "b"], "rows": [["1"]]}
        ]);
        assert!(matches!(parse(&v), Err(StoryError::Schema { path, .. }) if path == "evidence[0].rows[0]"));
    }

    #[test]
    fn numbers_are_the_union_of_cells_and_claims() {
        let mut v = minimal();
        v["evidence"] = serde_json::json!([
            {"id": "t", "kind": "measurement_table", "header": ["x"], "rows": [["1.5"], ["2.0"]]},
            {"id": "c", "kind": "claim", "statement": "s", "values": [2.0]}
        ]);
        let got = extract_numbers(&parse(&v).unwrap());
        let want: BTreeSet<Decimal> = ["1.5", "2"].iter().map(|s| Decimal::from_str(s).unwrap()).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn direct_chat_gpt_row_contains_its_average() {
        let mut v = minimal();
        v["evidence"] = serde_json::json!([{
            "id": "directchat",
            "kind": "measurement_table",
            "header": ["Model","E1","E2","E3","E4","E5","E6","E7","E8","E9","E10","Avg"],
            "rows": [["GPT","3.62","3.01","5.97","3.33","3.49","4.06","5.34","4.23","3.64","4.09","4.08"]]
        }]);
        let numbers = extract_numbers(&parse(&v).unwrap());
        assert!(numbers.contains(&Decimal::from_str("4.08").unwrap()));
        assert_eq!(numbers.len(), 11);
    }

    #[test]
    fn template_is_a_valid_story() {
        let s = parse_story(template().as_bytes()).unwrap();
        assert_eq!(s.id, "my_story");
        assert_eq!(parse_story(s.to_json().as_bytes()).unwrap(), s);
    }
}
