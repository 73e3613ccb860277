//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by symbolic systems, estimators and the gluing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// The transition matrix is not primitive: the witness pair stays
    /// unreachable at the tested power, so orbit gluing is unavailable.
    #[error("transition matrix is not primitive: symbol pair ({from}, {to}) unreachable at power {power}")]
    NotPrimitive { from: u8, to: u8, power: usize },

    /// An enumeration or symbol budget was exceeded; the caller should
    /// switch to sampling or shrink the request.
    #[error("budget exceeded: {context} needs {needed}, cap is {cap}")]
    BudgetExceeded {
        needed: u128,
        cap: u128,
        context: String,
    },

    /// A word is too short for the requested orbit horizon; the caller must
    /// materialize a longer prefix.
    #[error("word too short: need {required} symbols, have {actual}")]
    InsufficientLength { required: usize, actual: usize },

    /// Power iteration failed to converge within the iteration cap.
    #[error("power iteration did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    /// A supplied ball collection fails to cover the target set.
    #[error("collection does not cover the set: witness word {witness}")]
    NotACover { witness: String },

    /// The two measures integrate the observable to the same value, so no
    /// oscillation target exists.
    #[error("measures are degenerate: both integrate the observable to {value}")]
    DegenerateMeasures { value: f64 },

    /// A level missed its weight target; the filter width or word length is
    /// too aggressive for the available candidate pool.
    #[error("level {level} missed its weight target: achieved rate {achieved:.6}, required {required:.6}")]
    TargetMissed {
        level: usize,
        achieved: f64,
        required: f64,
    },

    /// The product-of-weights counting bound failed at some horizon.
    #[error("counting bound failed at n={n}: lhs log {lhs_log:.6} < rhs log {rhs_log:.6}")]
    CountingBoundFailed { n: usize, lhs_log: f64, rhs_log: f64 },

    /// A ball mass exceeded the distribution-principle bound.
    #[error("mass bound failed for ball at n={n} around {center}: log mass {log_mass:.6} > log bound {log_bound:.6}")]
    MassBoundFailed {
        center: String,
        n: usize,
        log_mass: f64,
        log_bound: f64,
    },

    /// A root bracket does not straddle a sign change.
    #[error("no sign change on bracket [{lo}, {hi}]: f(lo)={f_lo:.6}, f(hi)={f_hi:.6}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    /// A potential table is missing an admissible word.
    #[error("potential table missing admissible word {word}")]
    MissingTableEntry { word: String },

    /// Generic precondition violation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
