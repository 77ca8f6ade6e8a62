//! Crate-wide error type for the numeric modules (geometry keeps its own
//! small enum, wrapped here so `?` composes across modules).

use crate::geometry::GeometryError;
use alloc::string::String;
use core::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Underlying manifold operation failed.
    Geometry(GeometryError),
    /// Slice/matrix shapes disagree.
    DimensionMismatch { context: &'static str },
    /// A quantity that must be strictly positive was not (ε, σ, t, ...).
    NonPositive { what: &'static str },
    /// Input failed a documented validity requirement.
    InvalidInput(String),
    /// Weights do not form a probability vector within tolerance.
    NotAProbability { what: &'static str, total: f64 },
    /// A non-finite value appeared where finiteness is required.
    NonFinite { context: &'static str },
    /// Iterative numerics produced a non-finite value; index identifies the
    /// step or iteration for diagnostics.
    NumericalFailure { context: &'static str, index: usize },
    /// Mutually inconsistent inputs (e.g. a dual gap negative beyond
    /// tolerance, signalling an unconverged reference value).
    Inconsistent(String),
    /// Instance exceeds a documented size cap.
    SizeCap { what: &'static str, limit: usize, got: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Geometry(e) => write!(f, "geometry: {e}"),
            Error::DimensionMismatch { context } => write!(f, "dimension mismatch: {context}"),
            Error::NonPositive { what } => write!(f, "{what} must be positive"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::NotAProbability { what, total } => {
                write!(f, "{what} must be a probability vector (sum = {total})")
            }
            Error::NonFinite { context } => write!(f, "non-finite value in {context}"),
            Error::NumericalFailure { context, index } => {
                write!(f, "non-finite value during {context} at index {index}")
            }
            Error::Inconsistent(msg) => write!(f, "inconsistent inputs: {msg}"),
            Error::SizeCap { what, limit, got } => {
                write!(f, "{what}: size {got} exceeds cap {limit}")
            }
        }
    }
}

impl From<GeometryError> for Error {
    fn from(e: GeometryError) -> Self {
        Error::Geometry(e)
    }
}

impl core::error::Error for Error {}
