//! Marker tokens embedded in draft prose.
//!
//! Grammar: `[[FIG:<label>]]`, `[[TAB:<label>]]`, `[[CITE:<key>]]`. The
//! argument may not contain brackets or line breaks. Label grammar is checked
//! separately so that a well-formed token with a bad label can be reported
//! precisely.

use serde::{Deserialize, Serialize};

use super::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerKind {
    Figure,
    Table,
    Cite,
}

impl MarkerKind {
    pub fn token(self) -> &'static str {
        match self {
            MarkerKind::Figure => "FIG",
            MarkerKind::Table => "TAB",
            MarkerKind::Cite => "CITE",
        }
    }

    fn from_token(token: &str) -> Option<Self> {
        match token {
            "FIG" => Some(MarkerKind::Figure),
            "TAB" => Some(MarkerKind::Table),
            "CITE" => Some(MarkerKind::Cite),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marker {
    pub kind: MarkerKind,
    pub label: String,
    pub span: Span,
}

impl Marker {
    pub fn is_visual(&self) -> bool {
        matches!(self.kind, MarkerKind::Figure | MarkerKind::Table)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalformedMarker {
    pub span: Span,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarkerScan {
    pub markers: Vec<Marker>,
    pub malformed: Vec<MalformedMarker>,
}

/// Find every marker token in `text`, in order of appearance.
pub fn scan_markers(text: &str) -> MarkerScan {
    let mut out = MarkerScan::default();
    let mut pos = 0;
    while let Some(found) = text[pos..].find("[[") {
        let start = pos + found;
        let body_start = start + 2;
        let line_end = text[body_start..]
            .find('\n')
            .map_or(text.len(), |i| body_start + i);
        let Some(close) = text[body_start..line_end].find("]]") else {
            out.malformed.push(MalformedMarker {
                span: Span::new(start, line_end),
                reason: "marker is not closed with `]]` on the same line".into(),
            });
            pos = line_end;
            continue;
        };
        let body_end = body_start + close;
        let end = body_end + 2;
        let body = &text[body_start..body_end];
        match parse_body(body) {
            Ok((kind, label)) => out.markers.push(Marker {
                kind,
                label: label.to_string(),
                span: Span::new(start, end),
            }),
            Err(reason) => out.malformed.push(MalformedMarker {
                span: Span::new(start, end),
                reason,
            }),
        }
        pos = end;
    }
    out
}

fn parse_body(body: &str) -> Result<(MarkerKind, &str), String> {
    let (kind, arg) = body
        .split_once(':')
        .ok_or_else(|| format!("marker `[[{body}]]` has no `KIND:` prefix"))?;
    let kind = MarkerKind::from_token(kind)
        .ok_or_else(|| format!("unknown marker kind `{kind}` (expected FIG, TAB or CITE)"))?;
    if arg.is_empty() {
        return Err(format!("{} marker has an empty argument", kind.token()));
    }
    if arg.contains(['[', ']']) {
        return Err(format!("{} marker argument contains a bracket", kind.token()));
    }
    Ok((kind, arg))
}
