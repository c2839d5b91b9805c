//! File formats, pipeline stages and reports behind the `unigeo` binary.

pub mod ablate;
pub mod checkpoint;
pub mod config;
pub mod csvio;
pub mod pipeline;
pub mod plot;
pub mod report;

/// A problem with the invocation or configuration rather than a runtime failure.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);
