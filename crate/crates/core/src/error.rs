use std::path::PathBuf;

use thiserror::Error;

use crate::model::{Violation, VersionId};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("structural violations: {}", join_violations(.0))]
    Structural(Vec<Violation>),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("non-canonical encoding: first divergence at byte {offset}")]
    Canonicality { offset: usize },

    #[error("unknown algorithm tag `{0}`")]
    UnknownAlgorithm(String),

    #[error("invalid key material: {0}")]
    Key(String),

    #[error("empty validity interval: {valid_from} .. {valid_to}")]
    EmptyValidity {
        valid_from: chrono::NaiveDate,
        valid_to: chrono::NaiveDate,
    },

    #[error("certificate role error: {0}")]
    Role(String),

    #[error("object is already sealed")]
    AlreadySealed,

    #[error("object is not sealed")]
    NotSealed,

    #[error("broken chain: {0}")]
    BrokenChain(String),

    #[error("seal date {date} outside signer certificate validity {valid_from} .. {valid_to}")]
    SealDateOutsideValidity {
        date: chrono::NaiveDate,
        valid_from: chrono::NaiveDate,
        valid_to: chrono::NaiveDate,
    },

    #[error("root epoch already registered for {institution} / {year}")]
    DuplicateEpoch { institution: String, year: i32 },

    #[error("peer key already registered under `{0}`")]
    DuplicatePeer(String),

    #[error("chain break: expected input digest {expected}, got {actual}")]
    ChainBreak { expected: String, actual: String },

    #[error("predecessor does not verify: {0}")]
    UnverifiablePredecessor(String),

    #[error("predecessor cycle through version {0}")]
    Cycle(VersionId),

    #[error("assembly error on line {line}: {message}")]
    Assembly { line: usize, message: String },

    #[error("program load error: {0}")]
    ProgramLoad(String),

    #[error("blob `{0}` is not vm-encoded")]
    NotVmEncoded(String),

    #[error("decoder {0} not found in package or nested predecessors")]
    MissingDecoder(String),

    #[error("decoder halted abnormally: {0}")]
    AbnormalHalt(String),

    #[error("forged identifier: embedded {embedded}, payload digest {computed}")]
    ForgedIdentifier { embedded: String, computed: String },

    #[error("object {0} not found")]
    NotFound(String),

    #[error("stored object {0} is corrupt")]
    StoredCorruption(String),

    #[error("store already holds different bytes under {0}")]
    Conflict(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(offset: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
