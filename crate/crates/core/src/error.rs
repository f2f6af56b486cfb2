use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("basis index {digit} out of range for subsystem `{label}` of dimension {dim}")]
    InvalidIndex {
        label: String,
        digit: usize,
        dim: usize,
    },
    #[error("invalid dimension {0}")]
    InvalidDimension(usize),
    #[error("subsystem label `{0}` is already present")]
    LabelClash(String),
    #[error("subsystem label `{0}` not found")]
    LabelNotFound(String),
    #[error("operator of size {got} does not match target dimension {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("operator is not unitary (deviation {0:e})")]
    NotUnitary(f64),
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("post-selection has zero success probability ({0:e})")]
    PostSelectionImpossible(f64),
    #[error("resource limit: {needed} complex entries exceed the cap of {cap}")]
    ResourceLimit { needed: u128, cap: u128 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
