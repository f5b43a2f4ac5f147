use std::io;
use std::path::{Path, PathBuf};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] wifsm_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: expected schema {expected}, found {found}", path.display())]
    Schema { path: PathBuf, expected: String, found: String },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{stage}: {source}")]
    Stage { stage: &'static str, source: Box<Error> },
}

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(path: &Path, line: usize, message: impl ToString) -> Self {
        Error::Parse { path: path.to_path_buf(), line, message: message.to_string() }
    }

    /// Process exit code: 1 usage/configuration, 2 input format, 3 evaluation.
    pub fn exit_code(&self) -> i32 {
        use wifsm_core::Error as C;
        match self {
            Error::Core(C::Format(_) | C::UnsupportedLinkType(_)) => 2,
            Error::Core(C::Evaluation(_) | C::Training(_)) => 3,
            Error::Core(C::Config(_) | C::Contract(_) | C::UnsupportedKind(_)) => 1,
            Error::Io { .. } | Error::Schema { .. } | Error::Parse { .. } => 2,
            Error::Usage(_) => 1,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}

/// Tags errors from one pipeline stage with its name.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage { stage, source: Box::new(e.into()) })
    }
}
