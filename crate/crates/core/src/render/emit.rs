use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::{scan, scan_markers, Marker, MarkerKind, ScanError};
use crate::contract::{
    validate_document, ArtifactPayload, ContractState, Location, RuleKind, Severity,
    VisualArtifact, Violation,
};
use crate::pipeline::{paragraph_ranges, Manuscript};

/// Bumped whenever the fixed preamble changes.
pub const PREAMBLE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("markers reference unregistered labels: {}", .0.join(", "))]
    UnknownMarker(Vec<String>),
    #[error("registered artifacts have no marker anywhere: {}", .0.join(", "))]
    UnplacedArtifact(Vec<String>),
    #[error("render blocked by {} violation(s): {}", .0.len(), blocked_subjects(.0))]
    RenderBlocked(Vec<Violation>),
    #[error("rendered output does not scan: {0}")]
    Scan(#[from] ScanError),
}

fn blocked_subjects(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("{} ({})", v.subject, v.rule_key))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Escape characters that are special in LaTeX text mode.
pub fn escape_latex(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '\\' => out.push_str(r"\textbackslash{}"),
            '^' => out.push_str(r"\textasciicircum{}"),
            '~' => out.push_str(r"\textasciitilde{}"),
            '{' | '}' | '$' | '&' | '#' | '_' | '%' => {
                out.push('\\');
                out.push(ch);
            }
            _ => out.push(ch),
        }
    }
    out
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn expand_marker(m: &Marker) -> String {
    match m.kind {
        MarkerKind::Figure => format!("Figure~\\ref{{{}}}", m.label),
        MarkerKind::Table => format!("Table~\\ref{{{}}}", m.label),
        MarkerKind::Cite => format!("\\cite{{{}}}", m.label),
    }
}

fn expand_paragraph(text: &str, markers: &[Marker]) -> String {
    let mut out = String::new();
    let mut pos = 0;
    for m in markers {
        out.push_str(&escape_latex(&text[pos..m.span.start]));
        out.push_str(&expand_marker(m));
        pos = m.span.end;
    }
    out.push_str(&escape_latex(&text[pos..]));
    collapse_whitespace(&out)
}

fn emit_float(out: &mut String, artifact: &VisualArtifact) {
    let caption = escape_latex(&collapse_whitespace(&artifact.description));
    match &artifact.payload {
        ArtifactPayload::Figure { placeholder } => {
            out.push_str("\\begin{figure}[t]\n\\centering\n");
            let _ = writeln!(out, "\\fbox{{{}}}", escape_latex(placeholder));
            let _ = writeln!(out, "\\caption{{{caption}}}");
            let _ = writeln!(out, "\\label{{{}}}", artifact.label);
            out.push_str("\\end{figure}\n");
        }
        ArtifactPayload::Table { header, rows } => {
            out.push_str("\\begin{table}[t]\n\\centering\n");
            let _ = writeln!(out, "\\caption{{{caption}}}");
            let _ = writeln!(out, "\\label{{{}}}", artifact.label);
            let _ = writeln!(out, "\\begin{{tabular}}{{{}}}", "l".repeat(header.len()));
            out.push_str("\\toprule\n");
            let row = |cells: &[String]| {
                cells.iter().map(|c| escape_latex(c.trim())).collect::<Vec<_>>().join(" & ") + " \\\\\n"
            };
            out.push_str(&row(header));
            out.push_str("\\midrule\n");
            for r in rows {
                out.push_str(&row(r));
            }
            out.push_str("\\bottomrule\n\\end{tabular}\n\\end{table}\n");
        }
    }
}

/// Expand a manuscript into LaTeX.
///
/// Each float is emitted once, right after the paragraph holding its first
/// marker. The output depends only on `(m, c)`.
pub fn emit(m: &Manuscript, c: &ContractState) -> Result<String, RenderError> {
    let mut unknown = Vec::new();
    let mut marked = BTreeSet::new();
    for (_, text) in m.section_texts() {
        for marker in scan_markers(text).markers.iter().filter(|m| m.is_visual()) {
            if c.artifact(&marker.label).is_some() {
                marked.insert(marker.label.clone());
            } else if !unknown.contains(&marker.label) {
                unknown.push(marker.label.clone());
            }
        }
    }
    if !unknown.is_empty() {
        return Err(RenderError::UnknownMarker(unknown));
    }
    let unplaced: Vec<String> = c.registry().keys().filter(|l| !marked.contains(*l)).cloned().collect();
    if !unplaced.is_empty() {
        return Err(RenderError::UnplacedArtifact(unplaced));
    }

    let mut out = String::new();
    let _ = writeln!(out, "% msgen manuscript preamble v{PREAMBLE_VERSION}");
    out.push_str("\\documentclass[11pt]{article}\n\\usepackage{graphicx}\n\\usepackage{booktabs}\n");
    let _ = writeln!(out, "\\title{{{}}}", escape_latex(&collapse_whitespace(&m.title)));
    out.push_str("\\date{}\n\\begin{document}\n\\maketitle\n");

    let mut placed = BTreeSet::new();
    for section in &m.sections {
        let _ = write!(
            out,
            "\n\\section{{{}}}\\label{{sec:{}}}\n",
            escape_latex(&collapse_whitespace(&section.spec.title)),
            section.spec.section_id
        );
        for range in paragraph_ranges(&section.text) {
            let text = &section.text[range];
            let markers = scan_markers(text).markers;
            let body = expand_paragraph(text, &markers);
            if body.is_empty() {
                continue;
            }
            out.push('\n');
            out.push_str(&body);
            out.push('\n');
            for marker in markers.iter().filter(|m| m.is_visual()) {
                if placed.insert(marker.label.clone()) {
                    out.push('\n');
                    emit_float(&mut out, &c.registry()[&marker.label]);
                }
            }
        }
    }
    out.push_str("\n\\end{document}\n");
    Ok(out)
}

fn emit_violations(err: &RenderError) -> Vec<Violation> {
    let violation = |rule: RuleKind, subject: &str, message: String| Violation {
        rule_key: rule.as_str().to_string(),
        severity: Severity::Error,
        subject: subject.to_string(),
        location: Location::default(),
        message,
    };
    match err {
        RenderError::UnknownMarker(labels) => labels
            .iter()
            .map(|l| violation(RuleKind::RefResolves, l, format!("marker references unregistered `{l}`")))
            .collect(),
        RenderError::UnplacedArtifact(labels) => labels
            .iter()
            .map(|l| violation(RuleKind::ArtifactPlacedOnce, l, format!("artifact `{l}` is never placed")))
            .collect(),
        RenderError::RenderBlocked(v) => v.clone(),
        RenderError::Scan(_) => Vec::new(),
    }
}

/// Emit, scan the result back and validate it against the contract.
///
/// Succeeds only with zero error-severity violations; emit failures are
/// reported as the violations they amount to.
pub fn renderer_stage(m: &Manuscript, c: &ContractState) -> Result<Manuscript, RenderError> {
    let latex = emit(m, c).map_err(|e| RenderError::RenderBlocked(emit_violations(&e)))?;
    let doc = scan(&latex)?;
    let errors: Vec<Violation> = validate_document(c, &doc)
        .into_iter()
        .filter(|v| v.severity == Severity::Error)
        .collect();
    if !errors.is_empty() {
        return Err(RenderError::RenderBlocked(errors));
    }
    let mut rendered = m.clone();
    rendered.rendered = Some(latex);
    Ok(rendered)
}
