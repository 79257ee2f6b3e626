//! Error type shared across the library.

use thiserror::Error;

/// Everything that can go wrong while building topologies, parsing documents,
/// configuring runs, or invoking the exhaustive oracles.
#[derive(Debug, Error)]
pub enum Error {
    /// A topology document failed to parse. The message carries the line/field
    /// locus reported by the deserializer.
    #[error("topology document error: {0}")]
    Document(String),

    /// The described graph violates a structural requirement (duplicate edge,
    /// dangling node reference, disconnected, ...).
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    /// A numeric or combinatorial parameter is out of range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested metric cannot be evaluated on this topology
    /// (e.g. euclidean distance on a graph without coordinates).
    #[error("metric unavailable: {0}")]
    MetricUnavailable(String),

    /// An exhaustive computation was refused because the instance exceeds the
    /// configured size guard.
    #[error("instance too large: {what} is {actual}, limit {limit}")]
    TooLarge {
        what: &'static str,
        actual: usize,
        limit: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
