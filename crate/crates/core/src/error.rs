use std::path::PathBuf;

use crate::network::{LinkId, NodeId};

#[derive(Debug, thiserror::Error)]
pub enum SegmentError {
    #[error("turn length {turn} m must be shorter than segment length {segment} m")]
    TurnTooLong { turn: f64, segment: f64 },
    #[error("bay length {bay} m must be shorter than turn length {turn} m")]
    BayTooLong { bay: f64, turn: f64 },
    #[error("unknown lane configuration token `{0}`")]
    UnknownToken(String),
    #[error("lane configuration `{0}` uses a bay lane but no bay length was given")]
    MissingBayLength(String),
    #[error("lane configuration `{config}` needs {needed} turn ids, got {given}")]
    IdCount { config: String, needed: usize, given: usize },
    #[error("no turning rate given for movement {0}")]
    MissingRate(char),
    #[error("no link parameters given for movement {0}")]
    MissingParams(char),
    #[error("unsupported lane configuration `{config}`: {reason}")]
    Unsupported { config: String, reason: String },
}

#[derive(Debug, thiserror::Error)]
pub enum NodeError {
    #[error("non-finite value in node problem: {0}")]
    NonFinite(String),
    #[error("negative value in node problem: {0}")]
    Negative(String),
    #[error("turning-rate matrix is {rows}x{cols}, expected {incoming}x{outgoing}")]
    Shape {
        rows: usize,
        cols: usize,
        incoming: usize,
        outgoing: usize,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("scenario failed validation with {} violation(s); first: {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<crate::network::Violation>),
    #[error("invariant breached at step {step} on {entity}: {detail}")]
    InvariantBreach {
        step: usize,
        entity: String,
        detail: String,
    },
    #[error("node {node} at step {step}: {source}")]
    Node {
        node: NodeId,
        step: usize,
        #[source]
        source: NodeError,
    },
    #[error("link {0} is not attached to exactly one upstream and one downstream node")]
    Dangling(LinkId),
}

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: at `{field}` (line {line}, column {column}): {message}")]
    Parse {
        path: PathBuf,
        field: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: unsupported schema version {found}, expected {expected}")]
    Schema {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{path}: segment {index}: {source}")]
    Segment {
        path: PathBuf,
        index: usize,
        #[source]
        source: SegmentError,
    },
    #[error("{path}: line {line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("trace header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
}

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty series")]
    Empty,
    #[error("traces do not share a step grid: {0}")]
    GridMismatch(String),
}
