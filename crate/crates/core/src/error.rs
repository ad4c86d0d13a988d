use thiserror::Error;

/// Errors raised by filter construction and evaluation.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument fell outside an operation's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model or distribution parameter violated its invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Every mixture component assigned zero likelihood to the observation.
    /// Under these continuous models this signals corrupted input, so we
    /// abort instead of renormalizing a zero marginal.
    #[error("impossible observation y = {y}: marginal likelihood is zero")]
    ImpossibleObservation { y: f64 },

    /// No finite log-weight was supplied to a normalization.
    #[error("degenerate weights: all log-weights are -inf")]
    DegenerateWeights,

    /// A formula divides by a gain that is zero (a = 0 or h = 0 with i >= 1).
    #[error("singular gain: {0}")]
    SingularGain(String),

    /// Operation not defined for the requested family/parameter combination.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A distribution was passed to a family it does not belong to.
    #[error("family mismatch: expected {expected}, got {got}")]
    FamilyMismatch { expected: String, got: String },

    /// The quadrature window failed to capture enough probability mass.
    #[error("grid window leaks probability mass {leak:.3e}; widen the window")]
    GridWindowLeak { leak: f64 },

    /// All particle weights collapsed to zero likelihood.
    #[error("particle weights collapsed at step {step}")]
    ParticleDegeneracy { step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
