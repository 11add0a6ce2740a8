use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LawError {
    #[error("weights sum to {0}, expected 1")]
    NonNormalized(f64),
    #[error("support on axis {axis} has gcd {gcd}; the walk is not irreducible")]
    Reducible { axis: usize, gcd: usize },
    #[error("negative weight {0}")]
    NegativeWeight(f64),
    #[error("top-range weight on axis {axis} is zero")]
    ZeroTopWeight { axis: usize },
    #[error("zeta0 = 1: the walk never moves")]
    DegenerateLazy,
    #[error("malformed law: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("distribution needs {needed} entries, budget is {budget}")]
    CapacityExceeded { needed: usize, budget: usize },
    #[error("{panels} panels per axis is below the exactness minimum {minimum}")]
    ResolutionTooLow { panels: usize, minimum: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OffspringError {
    #[error("mean offspring {0} is not above 1")]
    SubcriticalOrCritical(f64),
    #[error("P(N=0) = {0} > 0: extinction is possible")]
    HasExtinction(f64),
    #[error("offspring probabilities sum to {0}, expected 1")]
    NonNormalized(f64),
    #[error("malformed offspring table: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("particle count overflowed {width}-bit counters at generation {generation}")]
    CountOverflow { generation: u64, width: u32 },
}

/// Errors surfaced by the experiment harness and CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Law(#[from] LawError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Offspring(#[from] OffspringError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("config: {0}")]
    Config(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
