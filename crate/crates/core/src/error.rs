use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    Domain(String),
    /// The requested quantity is infinite (e.g. an untruncated integral whose
    /// integrated rate converges).
    Divergence(String),
    /// A computed value left its admissible range by more than round-off.
    NumericalInstability { context: &'static str, value: f64 },
    /// The operation only supports a restricted class of size histories.
    UnsupportedHistory(String),
    /// Invalid demography or entry, with the path to the offending field.
    Validation { path: String, reason: String },
    /// Full-spectrum enumeration would exceed the configured cap.
    TooLarge { size: u128, cap: u128 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Divergence(msg) => write!(f, "divergent quantity: {msg}"),
            Error::NumericalInstability { context, value } => {
                write!(f, "numerical instability in {context} (value {value:e})")
            }
            Error::UnsupportedHistory(msg) => write!(f, "unsupported size history: {msg}"),
            Error::Validation { path, reason } => write!(f, "{path}: {reason}"),
            Error::TooLarge { size, cap } => {
                write!(f, "spectrum has {size} entries, above the cap of {cap}")
            }
        }
    }
}

impl core::error::Error for Error {}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
