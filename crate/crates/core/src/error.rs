use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("shift out of range: entry {value} at ({row}, {col}) with lifting factor {z}")]
    ShiftOutOfRange {
        row: usize,
        col: usize,
        value: i64,
        z: usize,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("graph has no edges")]
    EmptyGraph,
    #[error("check node {0} has degree {1}; every check needs at least two neighbours")]
    DegenerateCheck(usize, usize),
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("unknown sharing scheme `{0}`")]
    UnknownScheme(String),
    #[error("iteration {iteration} is not covered by the weights (covered: {covered})")]
    Coverage { iteration: usize, covered: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("decode record has no trace for iteration {0}")]
    MissingTrace(usize),
    #[error("record was early-stopped at iteration {0}; training needs the full unrolled depth")]
    EarlyStopped(usize),
    #[error("non-finite gradient at parameter {index}: {value}")]
    NonFiniteGradient { index: usize, value: f64 },
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("region too easy: accepted {accepted} of {drawn} frames (rate below floor {floor:e})")]
    RegionTooEasy { accepted: usize, drawn: u64, floor: f64 },
    #[error("bad dataset file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
