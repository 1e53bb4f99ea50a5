//! Canonical label grammar: `fig:` or `tab:` followed by `[a-z0-9_]+`.

use super::ArtifactKind;

pub const FIGURE_PREFIX: &str = "fig:";
pub const TABLE_PREFIX: &str = "tab:";

fn is_body(body: &str) -> bool {
    !body.is_empty()
        && body
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

/// Kind implied by the prefix of a well-formed label.
pub fn label_kind(label: &str) -> Option<ArtifactKind> {
    if let Some(body) = label.strip_prefix(FIGURE_PREFIX) {
        is_body(body).then_some(ArtifactKind::Figure)
    } else if let Some(body) = label.strip_prefix(TABLE_PREFIX) {
        is_body(body).then_some(ArtifactKind::Table)
    } else {
        None
    }
}

pub fn is_valid_label(label: &str) -> bool {
    label_kind(label).is_some()
}

/// Lowercase and replace each whitespace character with `_`.
///
/// The result still has to pass [`is_valid_label`].
pub fn normalize_label(raw: &str) -> String {
    raw.trim()
        .chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .flat_map(char::to_lowercase)
        .collect()
}

/// Section identifiers share the label body grammar.
pub fn is_valid_section_id(id: &str) -> bool {
    is_body(id)
}

/// Citation keys: ASCII alphanumerics plus `_ - : .`.
pub fn is_valid_cite_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'_' | b'-' | b':' | b'.'))
}
