use std::path::PathBuf;

/// Failures surfaced by the command-line front end, each with a fixed exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Core {
        path: PathBuf,
        #[source]
        source: mdsense::Error,
    },
    #[error(transparent)]
    Lib(#[from] mdsense::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches a file path to a library error raised while handling it.
    pub fn at(path: impl Into<PathBuf>, source: mdsense::Error) -> Self {
        CliError::Core {
            path: path.into(),
            source,
        }
    }

    /// 2 config, 3 I/O, 4 format, 5 numerical.
    pub fn exit_code(&self) -> i32 {
        use mdsense::Error as E;
        let lib = match self {
            CliError::Config(_) => return 2,
            CliError::Io { .. } => return 3,
            CliError::Core { source, .. } | CliError::Lib(source) => source,
        };
        match lib {
            E::Parameter(_) | E::Config(_) | E::Unsupported(_) => 2,
            E::Io(_) => 3,
            E::Format { .. } => 4,
            E::Singular { .. } | E::Divergence { .. } | E::Estimation(_) | E::Detection(_) => 5,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
