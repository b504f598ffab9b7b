use thiserror::Error;

/// Everything that can go wrong while computing or verifying a bound.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("inconsistent bounds: lower {lower} exceeds upper {upper}")]
    InconsistentBounds { lower: f64, upper: f64 },

    /// The conditioning event `Y(1) = 1` has probability zero.
    #[error("probability of causation undefined: {0}")]
    PcUndefined(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("assumption violated: {0}")]
    AssumptionViolation(String),

    #[error("law generation failed: {0}")]
    GenerationFailure(String),
}

pub type Result<T> = std::result::Result<T, BoundsError>;
