//! Contract-governed manuscript generation.
//!
//! A research story goes in; a validated LaTeX manuscript comes out. The
//! stages share one versioned [`contract::ContractState`] that records which
//! figures and tables exist, where they must appear and which rules the
//! rendered document has to satisfy. Deterministic evaluators check each
//! intermediate artifact and feed contract updates back before the next stage.
//!
//! | module | purpose |
//! |---|---|
//! | [`contract`] | registry, obligations, rules, delta application, validator |
//! | [`story`] | input schema and evidence extraction |
//! | [`agents`] | role-tagged agent interface, scripted and HTTP backends |
//! | [`evaluate`] | evaluators, feedback signals, score aggregation |
//! | [`pipeline`] | the orchestrator and its journal |
//! | [`render`] | marker expansion, LaTeX emission and the LaTeX-subset scanner |

pub mod agents;
pub mod canonical;
pub mod contract;
pub mod decimal;
pub mod evaluate;
pub mod pipeline;
pub mod render;
pub mod story;
