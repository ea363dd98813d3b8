//! Error type shared by every module in the crate.

use core::fmt;

/// Why an operation could not produce a value.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation
    /// (e.g. a probability outside `[0, 1)`, a negative layer width).
    Domain(&'static str),
    /// A parameter set violates the validity conditions of the premium
    /// scheme or of a distribution/distortion constructor.
    InvalidParams(&'static str),
    /// A contract construction cannot satisfy its mean constraint; the
    /// message names the violated constraint.
    Infeasible(&'static str),
    /// A denominator degenerated to zero, typically a flat survival
    /// function where a strict decrease was required.
    Singular(&'static str),
    /// A tail integral diverges, so the requested risk measure is infinite.
    Divergent(&'static str),
    /// A root-finding or bracketing routine failed to converge.
    Numerical(&'static str),
    /// The operation is not defined for this family, kind, or configuration.
    Unsupported(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::InvalidParams(m) => write!(f, "invalid parameters: {m}"),
            Error::Infeasible(m) => write!(f, "infeasible: {m}"),
            Error::Singular(m) => write!(f, "singular: {m}"),
            Error::Divergent(m) => write!(f, "divergent: {m}"),
            Error::Numerical(m) => write!(f, "numerical failure: {m}"),
            Error::Unsupported(m) => write!(f, "unsupported: {m}"),
        }
    }
}

impl core::error::Error for Error {}
