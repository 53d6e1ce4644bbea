use alloc::string::String;

use crate::types::TypeIndex;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("need at least two types")]
    TooFewTypes,
    #[error("learning rate must be positive and finite, got {0}")]
    InvalidLearningRate(f64),
    #[error("exploration rate must lie in [0, 1), got {0}")]
    InvalidExploration(f64),
    #[error("type names must be unique and non-empty: {0:?}")]
    InvalidTypeName(String),
    #[error("dimension mismatch: expected {expected} types, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(&'static str),
    #[error("empty constraint polytope")]
    EmptyPolytope,
    #[error("clicked type had zero display probability")]
    ZeroProbabilityClick,
    #[error("constraints unsatisfiable at page size {page_size}")]
    UnsatisfiableAtPageSize { page_size: usize },
    #[error("page size must be positive")]
    EmptyPage,
    #[error("pool exhausted for type {type_index}: short by {shortfall} articles")]
    PoolExhausted { type_index: TypeIndex, shortfall: usize },
    #[error("click on unknown article {0:?}")]
    UnknownArticle(String),
}
