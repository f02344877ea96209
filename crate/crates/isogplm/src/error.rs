use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// `line` counts the header as line 1.
    #[error("line {line}, column `{column}`: {message}")]
    Field { line: u64, column: String, message: String },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] isogplm_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    /// Process exit code: numerical failures map to 2, everything else
    /// (usage, files, malformed input) to 1.
    pub fn exit_code(&self) -> i32 {
        use isogplm_core::Error as E;
        match self {
            Self::Core(E::Numeric(_) | E::NoBracket(_) | E::AllFailed(_) | E::TooManyFailures { .. }) => 2,
            _ => 1,
        }
    }
}
