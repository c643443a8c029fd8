use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the fine-tuning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("loss must reduce to a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("{stage} diverged at step {step}: non-finite value")]
    Diverged { stage: &'static str, step: usize },

    #[error("non-finite adjoint on path {path} at step {step}")]
    NonFiniteAdjoint { path: usize, step: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty tail set for beta = {beta} with n = {n} samples")]
    EmptyTail { beta: f64, n: usize },

    #[error("critic must be trained before its gradient can be used")]
    UntrainedCritic,

    #[error("matrix is singular or ill-conditioned (condition number estimate {condition:e})")]
    SingularMatrix { condition: f64 },

    #[error("unsupported functional `{name}`: {reason}")]
    Unsupported { name: String, reason: String },

    #[error("unknown scenario `{name}`; available: {}", available.join(", "))]
    UnknownScenario {
        name: String,
        available: Vec<&'static str>,
    },

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("iteration {iteration} failed: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("cannot read {}: {source}", path.display())]
    Path {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
