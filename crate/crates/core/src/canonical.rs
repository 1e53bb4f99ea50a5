//! Canonical JSON: sorted object keys, compact separators, trailing newline.

use serde::Serialize;

/// Serialize `value` as canonical JSON (keys sorted at every level).
///
/// Going through `serde_json::Value` sorts keys because its map type is a
/// `BTreeMap` unless `preserve_order` is enabled, which this crate never does.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let tree = serde_json::to_value(value)?;
    serde_json::to_string(&tree)
}

/// Pretty canonical form with a trailing newline, used for files on disk.
pub fn to_canonical_file<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let tree = serde_json::to_value(value)?;
    let mut out = serde_json::to_string_pretty(&tree)?;
    out.push('\n');
    Ok(out)
}
