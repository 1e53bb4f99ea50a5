//! Single-pass reader for the LaTeX subset the renderer emits.
//!
//! Recognized: `\section`, `\label`, `\ref`, `\cite` (comma-separated keys),
//! `\caption`, `\begin`/`\end` for `figure` and `table`. A recognized command
//! must be followed immediately by `{`; otherwise it is opaque like every
//! other control sequence. `%` starts a comment that runs to end of line.
//! A blank line ends a paragraph. No macro expansion happens.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Half-open byte range into the scanned source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Self { start, end }
    }

    pub fn contains(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloatKind {
    Figure,
    Table,
}

impl FloatKind {
    pub fn env_name(self) -> &'static str {
        match self {
            FloatKind::Figure => "figure",
            FloatKind::Table => "table",
        }
    }

    fn from_env_name(name: &str) -> Option<Self> {
        match name {
            "figure" => Some(FloatKind::Figure),
            "table" => Some(FloatKind::Table),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRef {
    pub label: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CiteKey {
    pub key: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FloatEnv {
    pub kind: FloatKind,
    /// First `\label` whose innermost enclosing float is this one.
    pub label: Option<String>,
    pub caption: Option<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub span: Span,
    /// Targets of `\ref` commands inside the paragraph, in order.
    pub refs: Vec<String>,
    /// Whitespace-separated tokens holding at least one alphanumeric
    /// character, after dropping control sequences and comments.
    pub words: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScannedSection {
    pub title: String,
    /// A `\label` that directly follows the `\section` command.
    pub label: Option<String>,
    pub span: Span,
    pub paragraphs: Vec<Paragraph>,
}

impl ScannedSection {
    /// Section identifier: `sec:<id>` labels yield `<id>`, otherwise the title.
    pub fn id(&self) -> &str {
        self.label
            .as_deref()
            .and_then(|l| l.strip_prefix("sec:"))
            .unwrap_or(&self.title)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScannedDocument {
    pub len: usize,
    pub labels: Vec<LabelRef>,
    pub refs: Vec<LabelRef>,
    pub cites: Vec<CiteKey>,
    /// Float environments ordered by their `\begin`.
    pub environments: Vec<FloatEnv>,
    /// Paragraphs before the first `\section`.
    pub front_matter: Vec<Paragraph>,
    pub sections: Vec<ScannedSection>,
}

impl ScannedDocument {
    /// Index of the section whose body contains `offset`; `None` for front matter.
    pub fn section_at(&self, offset: usize) -> Option<usize> {
        self.sections
            .iter()
            .rposition(|s| s.span.start <= offset)
    }

    pub fn section_index(&self, id: &str) -> Option<usize> {
        self.sections.iter().position(|s| s.id() == id)
    }

    pub fn section_ids(&self) -> Vec<&str> {
        self.sections.iter().map(ScannedSection::id).collect()
    }

    /// Labels that name a float environment, in environment order.
    pub fn placed_labels(&self) -> impl Iterator<Item = &str> {
        self.environments.iter().filter_map(|e| e.label.as_deref())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScanError {
    #[error("unbalanced `{env}` environment at bytes {}..{}", span.start, span.end)]
    UnbalancedEnvironment { env: String, span: Span },
    #[error("`\\{command}` argument is never closed (bytes {}..{})", span.start, span.end)]
    UnterminatedCommandArgument { command: String, span: Span },
}

impl ScanError {
    pub fn span(&self) -> Span {
        match self {
            ScanError::UnbalancedEnvironment { span, .. }
            | ScanError::UnterminatedCommandArgument { span, .. } => *span,
        }
    }
}

const RECOGNIZED: [&str; 7] = ["section", "label", "ref", "cite", "caption", "begin", "end"];

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token<'a> {
    Text(Span),
    /// Opaque control sequence such as `\maketitle` or `\%`.
    Control(Span),
    Command {
        name: &'a str,
        arg: Span,
        span: Span,
    },
    Comment,
    ParBreak,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Self { src, pos: 0 }
    }

    fn peek(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn next_token(&mut self) -> Result<Option<Token<'a>>, ScanError> {
        let bytes = self.src.as_bytes();
        let start = self.pos;
        let Some(b) = self.peek() else {
            return Ok(None);
        };
        match b {
            b'\\' => self.control(start).map(Some),
            b'%' => {
                self.pos = self.src[start..]
                    .find('\n')
                    .map_or(self.src.len(), |i| start + i);
                Ok(Some(Token::Comment))
            }
            b'\n' => {
                let mut probe = start + 1;
                while probe < bytes.len() && matches!(bytes[probe], b' ' | b'\t' | b'\r') {
                    probe += 1;
                }
                if probe < bytes.len() && bytes[probe] == b'\n' {
                    // Swallow the whole run of blank lines.
                    self.pos = probe + 1;
                    loop {
                        let mut p = self.pos;
                        while p < bytes.len() && matches!(bytes[p], b' ' | b'\t' | b'\r') {
                            p += 1;
                        }
                        if p < bytes.len() && bytes[p] == b'\n' {
                            self.pos = p + 1;
                        } else {
                            break;
                        }
                    }
                    Ok(Some(Token::ParBreak))
                } else {
                    self.pos = start + 1;
                    Ok(Some(Token::Text(Span::new(start, start + 1))))
                }
            }
            _ => {
                let end = self.src[start..]
                    .find(['\\', '%', '\n'])
                    .map_or(self.src.len(), |i| start + i);
                self.pos = end;
                Ok(Some(Token::Text(Span::new(start, end))))
            }
        }
    }

    fn control(&mut self, start: usize) -> Result<Token<'a>, ScanError> {
        let bytes = self.src.as_bytes();
        let name_start = start + 1;
        let mut name_end = name_start;
        while name_end < bytes.len() && bytes[name_end].is_ascii_alphabetic() {
            name_end += 1;
        }
        if name_end == name_start {
            // Control symbol: backslash plus one character (or a lone backslash at EOF).
            let width = self.src[name_start..].chars().next().map_or(0, char::len_utf8);
            self.pos = name_start + width;
            return Ok(Token::Control(Span::new(start, self.pos)));
        }
        let name = &self.src[name_start..name_end];
        if !RECOGNIZED.contains(&name) || bytes.get(name_end) != Some(&b'{') {
            self.pos = name_end;
            return Ok(Token::Control(Span::new(start, name_end)));
        }
        let arg_start = name_end + 1;
        let mut depth = 1usize;
        let mut i = arg_start;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' => {
                    i += 1;
                    if i < bytes.len() {
                        i += self.src[i..].chars().next().map_or(1, char::len_utf8);
                    }
                    continue;
                }
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        self.pos = i + 1;
                        return Ok(Token::Command {
                            name,
                            arg: Span::new(arg_start, i),
                            span: Span::new(start, i + 1),
                        });
                    }
                }
                _ => {}
            }
            i += 1;
        }
        Err(ScanError::UnterminatedCommandArgument {
            command: name.to_string(),
            span: Span::new(start, bytes.len()),
        })
    }
}

#[derive(Default)]
struct OpenParagraph {
    span: Option<Span>,
    words: String,
    refs: Vec<String>,
}

impl OpenParagraph {
    fn extend(&mut self, span: Span) {
        self.span = Some(match self.span {
            Some(s) => Span::new(s.start, span.end),
            None => span,
        });
    }
}

struct OpenFloat {
    kind: FloatKind,
    begin: Span,
    index: usize,
}

struct Builder<'a> {
    src: &'a str,
    doc: ScannedDocument,
    floats: Vec<OpenFloat>,
    paragraph: OpenParagraph,
    pending_section_label: bool,
}

impl<'a> Builder<'a> {
    fn close_paragraph(&mut self) {
        let open = std::mem::take(&mut self.paragraph);
        let Some(span) = open.span else { return };
        let paragraph = Paragraph {
            span,
            refs: open.refs,
            words: count_words(&open.words),
        };
        match self.doc.sections.last_mut() {
            Some(section) => section.paragraphs.push(paragraph),
            None => self.doc.front_matter.push(paragraph),
        }
    }

    fn in_float(&self) -> bool {
        !self.floats.is_empty()
    }

    /// Record a non-text token as paragraph content when outside floats.
    fn content(&mut self, span: Span, word_text: &str) {
        self.pending_section_label = false;
        if self.in_float() {
            return;
        }
        self.paragraph.extend(span);
        self.paragraph.words.push_str(word_text);
    }

    fn text(&mut self, span: Span) {
        let raw = &self.src[span.start..span.end];
        let trimmed_start = raw.len() - raw.trim_start().len();
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            if !self.in_float() && self.paragraph.span.is_some() {
                self.paragraph.words.push_str(raw);
            }
            return;
        }
        self.pending_section_label = false;
        if self.in_float() {
            return;
        }
        let start = span.start + trimmed_start;
        self.paragraph.extend(Span::new(start, start + trimmed.len()));
        self.paragraph.words.push_str(raw);
    }

    fn command(&mut self, name: &str, arg: Span, span: Span) -> Result<(), ScanError> {
        let raw_arg = &self.src[arg.start..arg.end];
        let value = raw_arg.trim();
        match name {
            "section" => {
                self.close_paragraph();
                self.doc.sections.push(ScannedSection {
                    title: value.to_string(),
                    label: None,
                    span,
                    paragraphs: Vec::new(),
                });
                self.pending_section_label = true;
            }
            "label" => {
                self.doc.labels.push(LabelRef { label: value.to_string(), span });
                if let Some(top) = self.floats.last() {
                    let env = &mut self.doc.environments[top.index];
                    if env.label.is_none() {
                        env.label = Some(value.to_string());
                    }
                }
                if self.pending_section_label {
                    self.pending_section_label = false;
                    if let Some(section) = self.doc.sections.last_mut() {
                        section.label = Some(value.to_string());
                    }
                } else {
                    self.content(span, " ");
                }
            }
            "ref" => {
                self.doc.refs.push(LabelRef { label: value.to_string(), span });
                if !self.in_float() {
                    self.paragraph.refs.push(value.to_string());
                }
                self.content(span, " ");
            }
            "cite" => {
                let mut offset = arg.start;
                for piece in raw_arg.split(',') {
                    let lead = piece.len() - piece.trim_start().len();
                    let key = piece.trim();
                    if !key.is_empty() {
                        let start = offset + lead;
                        self.doc.cites.push(CiteKey {
                            key: key.to_string(),
                            span: Span::new(start, start + key.len()),
                        });
                    }
                    offset += piece.len() + 1;
                }
                self.content(span, " ");
            }
            "caption" => {
                if let Some(top) = self.floats.last() {
                    let env = &mut self.doc.environments[top.index];
                    if env.caption.is_none() {
                        env.caption = Some(value.to_string());
                    }
                }
                self.content(span, " ");
            }
            "begin" => match FloatKind::from_env_name(value) {
                Some(kind) => {
                    self.pending_section_label = false;
                    if !self.in_float() {
                        self.close_paragraph();
                    }
                    self.floats.push(OpenFloat {
                        kind,
                        begin: span,
                        index: self.doc.environments.len(),
                    });
                    self.doc.environments.push(FloatEnv {
                        kind,
                        label: None,
                        caption: None,
                        span,
                    });
                }
                None => self.content(span, " "),
            },
            "end" => match FloatKind::from_env_name(value) {
                Some(kind) => {
                    self.pending_section_label = false;
                    match self.floats.pop() {
                        Some(open) if open.kind == kind => {
                            self.doc.environments[open.index].span =
                                Span::new(open.begin.start, span.end);
                        }
                        _ => {
                            return Err(ScanError::UnbalancedEnvironment {
                                env: kind.env_name().to_string(),
                                span,
                            })
                        }
                    }
                }
                None => self.content(span, " "),
            },
            other => unreachable!("unrecognized command `{other}` reached the builder"),
        }
        Ok(())
    }
}

fn count_words(text: &str) -> usize {
    text.split_whitespace()
        .filter(|w| w.chars().any(char::is_alphanumeric))
        .count()
}

/// Scan `latex` into labels, references, citations, floats, sections and
/// paragraphs.
pub fn scan(latex: &str) -> Result<ScannedDocument, ScanError> {
    let mut lexer = Lexer::new(latex);
    let mut builder = Builder {
        src: latex,
        doc: ScannedDocument {
            len: latex.len(),
            ..ScannedDocument::default()
        },
        floats: Vec::new(),
        paragraph: OpenParagraph::default(),
        pending_section_label: false,
    };
    while let Some(token) = lexer.next_token()? {
        match token {
            Token::Text(span) => builder.text(span),
            Token::Control(span) => builder.content(span, ""),
            Token::Command { name, arg, span } => builder.command(name, arg, span)?,
            Token::Comment => {}
            Token::ParBreak => {
                if !builder.in_float() {
                    builder.close_paragraph();
                }
            }
        }
    }
    if let Some(open) = builder.floats.pop() {
        return Err(ScanError::UnbalancedEnvironment {
            env: open.kind.env_name().to_string(),
            span: open.begin,
        });
    }
    builder.close_paragraph();
    Ok(builder.doc)
}
