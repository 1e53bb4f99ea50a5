//! LaTeX emission and the LaTeX-subset scanner used to validate it.
//!
//! The renderer expands draft markers (`[[FIG:…]]`, `[[TAB:…]]`,
//! `[[CITE:…]]`) into LaTeX, scans its own output back and runs the contract
//! validator over the result. Rendering is blocked while any error-severity
//! violation remains.

mod emit;
pub mod markers;
mod scan;

pub use emit::{emit, escape_latex, renderer_stage, RenderError, PREAMBLE_VERSION};
pub use markers::{scan_markers, MalformedMarker, Marker, MarkerKind, MarkerScan};
pub use scan::{
    scan, CiteKey, FloatEnv, FloatKind, LabelRef, Paragraph, ScanError, ScannedDocument,
    ScannedSection, Span,
};
