use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CtmError {
    /// A value outside the domain of a function (non-finite input, etc).
    #[error("domain error: {0}")]
    Domain(String),

    /// The caller violated a precondition (bad order, dimension mismatch, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// A network or parameter set failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A closed-form coefficient is singular (division by zero).
    #[error("singular coefficient: {0}")]
    Singular(String),

    /// Numerical integration failed.
    #[error("integration failed at t = {last_good_time}: {reason}")]
    Integration { last_good_time: f64, reason: String },

    /// A root find or continuation did not produce a usable answer.
    #[error("solver failure: {0}")]
    Solver(String),

    /// No pitchfork found along the symmetric branch.
    #[error("no bifurcation: {0}")]
    NoBifurcation(String),

    /// The cubic coefficient is too close to zero to classify the pitchfork.
    #[error("degenerate pitchfork: lambda3 = {lambda3:e} at u = {u_c}")]
    Degenerate { u_c: f64, lambda3: f64 },

    /// An analysis could not reach a verdict (too-short series, failed oracle).
    #[error("inconclusive: {0}")]
    Inconclusive(String),

    /// Malformed input file.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = CtmError> = std::result::Result<T, E>;
