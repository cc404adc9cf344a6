use thiserror::Error;

/// Errors produced by the stability engine and simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("unsupported activation kind `{0}` (expected `logistic` or `bipolar`)")]
    UnsupportedSigma(String),

    #[error("activation {which} of node {node} has a zero derivative bound ({component})")]
    DegenerateActivation {
        node: usize,
        which: &'static str,
        component: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("family {family} requires activation class H1 for f, but bounds are only H2")]
    ClassMismatch { family: &'static str },

    #[error("weights must be strictly positive and finite (entry {index} = {value})")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("invalid rate {0}: {1}")]
    InvalidRate(f64, &'static str),

    #[error("not a Z-matrix: entry ({row}, {col}) = {value} is a positive off-diagonal")]
    NotZMatrix { row: usize, col: usize, value: f64 },

    #[error("{0}")]
    Precondition(String),

    #[error("simulation diverged at t = {time} (state norm {norm:e})")]
    Divergence { time: f64, norm: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
