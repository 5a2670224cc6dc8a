use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An iterative decomposition did not converge.
    #[error("{routine} failed to converge on a {rows}x{cols} matrix")]
    Decomposition {
        routine: &'static str,
        rows: usize,
        cols: usize,
    },

    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two operands have incompatible shapes.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A documented precondition on the caller was not met.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The requested problem exceeds a configured size guard.
    #[error("dimension {dim} exceeds the guard of {limit}")]
    Resource { dim: usize, limit: usize },

    /// Not enough usable data for a fit.
    #[error("fit error: {0}")]
    Fit(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! domain {
    ($($arg:tt)*) => { $crate::error::Error::Domain(alloc::format!($($arg)*)) };
}
macro_rules! shape {
    ($($arg:tt)*) => { $crate::error::Error::Shape(alloc::format!($($arg)*)) };
}
macro_rules! contract {
    ($($arg:tt)*) => { $crate::error::Error::Contract(alloc::format!($($arg)*)) };
}
pub(crate) use {contract, domain, shape};
