use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid feature schema: {0}")]
    InvalidSchema(String),

    #[error("feature `{feature}` has value {value} outside its domain [0, {domain})")]
    FeatureOutOfRange {
        feature: String,
        value: usize,
        domain: usize,
    },

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("index {index} out of range for {what} of size {bound}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no convergence after {sweeps} sweeps (last residual {residual:e})")]
    NotConverged { sweeps: usize, residual: f64 },

    #[error("no samples recorded for state {state}, action {action}")]
    EmptyRow { state: usize, action: usize },

    #[error("unsolvable environment: {0}")]
    Unsolvable(String),
}
