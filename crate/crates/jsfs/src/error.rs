use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] jsfs_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Input(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INPUT: i32 = 2;
    pub const INSTABILITY: i32 = 3;
    pub const MISMATCH: i32 = 4;
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Core(jsfs_core::Error::Validation {
            path: path.into(),
            reason: reason.into(),
        })
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(jsfs_core::Error::NumericalInstability { .. }) => exit::INSTABILITY,
            _ => exit::INPUT,
        }
    }
}
