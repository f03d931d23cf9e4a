use thiserror::Error;

/// Errors raised by the numeric core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("incompatible sampling: grid with {left} points vs grid with {right} points")]
    GridMismatch { left: usize, right: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("value {value} outside the domain [0, 1]")]
    Domain { value: f64 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("time stamps must be strictly increasing (violated at index {index})")]
    NonMonotoneTimes { index: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("empty input")]
    Empty,

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("basis is rank deficient at element {index} (pivot norm {pivot:e})")]
    RankDeficient { index: usize, pivot: f64 },

    #[error("invalid warping: {0}")]
    InvalidWarping(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("estimation failed at iteration {iteration} while updating {block}: {source}")]
    Estimation {
        iteration: usize,
        block: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("bootstrap failed: {failed} of {total} replicates could not be estimated")]
    Bootstrap { failed: usize, total: usize },

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error("rates must be strictly positive (index {index} is {value})")]
    NonPositiveRate { index: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
