use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// The base is not usable: `beta <= 1` or within tolerance of an integer.
    #[error("beta must be a non-integer greater than 1, got {beta}")]
    InvalidBeta { beta: f64 },

    /// The coin-flip parameter must lie strictly between 0 and 1.
    #[error("p must lie in the open interval (0, 1), got {p}")]
    InvalidProbability { p: f64 },

    /// A point fell outside the expansion interval beyond tolerance.
    #[error("x = {x} lies outside [0, {j_max}]")]
    OutsideDomain { x: f64, j_max: f64 },

    /// A switch region was hit but the coin sequence had no bits left.
    #[error("coin sequence exhausted at a switch region (step {step})")]
    ExhaustedCoins { step: usize },

    /// Single-call expansions are capped; see `MAX_EXPANSION_DIGITS`.
    #[error("requested {requested} digits, per-call cap is {cap}")]
    DigitCapExceeded { requested: usize, cap: usize },

    /// The supplied digits are not an expansion of the given point.
    #[error("digit {digit} at step {step} is not admissible here ({reason})")]
    InvalidExpansion {
        step: usize,
        digit: u32,
        reason: &'static str,
    },

    /// Iteration stopped before reaching the requested tolerance.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    /// An operation needed a hypothesis that the inputs do not satisfy.
    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),

    /// Construction produced inconsistent numerics (bug or pathological base).
    #[error("numerical construction failed: {0}")]
    NumericalFailure(String),

    /// Grid or sample-count argument out of range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
