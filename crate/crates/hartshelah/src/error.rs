//! Crate-wide error type.

use thiserror::Error;

use crate::model::Violation;

/// Errors reported by structure construction, morphism algebra, solving,
/// type machinery, and the text formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid atom token {token:?}: {reason}")]
    BadToken { token: String, reason: &'static str },

    #[error("duplicate atom {0:?}")]
    DuplicateAtom(String),

    #[error("arity must be at least 2, got {0}")]
    ArityTooSmall(usize),

    #[error("atom {0:?} does not belong to the model")]
    UnknownAtom(String),

    #[error("invalid block {block:?}: {reason}")]
    InvalidBlock { block: String, reason: String },

    #[error("invalid compatible tuple {tuple:?}: {reason}")]
    InvalidTuple { tuple: String, reason: String },

    #[error("model fails validation: {0:?}")]
    ModelViolations(Vec<Violation>),

    #[error("stalk sort mismatch: {0}")]
    SortMismatch(&'static str),

    #[error("stalk points lie over different blocks")]
    BlockMismatch,

    #[error("{what} does not belong to the model")]
    NotInModel { what: &'static str },

    #[error("atom set is not a subset of the model's index set")]
    NotSubset,

    #[error("{sub} is not a zero-offset induced submodel of {sup}")]
    NotInduced { sub: String, sup: String },

    #[error("atom map is not injective")]
    NotInjective,

    #[error("embedding is not bijective on atoms")]
    NotBijective,

    #[error("model mismatch: {0}")]
    ModelMismatch(&'static str),

    #[error("solution domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("solution family disagrees on shared block {0:?}")]
    FamilyDisagreement(String),

    #[error("invalid solution: {0}")]
    InvalidSolution(String),

    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),

    #[error("type instances have different base models")]
    MismatchedBases,

    #[error("element is algebraic over the middle model; the relation is not defined")]
    AlgebraicElement,

    #[error("models do not form a zero-offset induced chain: {0}")]
    BadChain(String),

    #[error("configuration error: {0}")]
    BadConfiguration(String),

    #[error("fingerprint incomplete — fall back to search")]
    FingerprintIncomplete,

    #[error("scale exceeded: {what} is {got}, limit {limit}")]
    ScaleExceeded {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    #[error("budget must be positive")]
    ZeroBudget,

    #[error("the extra atom set must be nonempty")]
    EmptyXplus,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("model reference mismatch: {0}")]
    ModelRefMismatch(String),

    #[error("unknown suite {0:?}")]
    UnknownSuite(String),

    #[error("unknown witness kind {0:?}")]
    UnknownWitness(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
