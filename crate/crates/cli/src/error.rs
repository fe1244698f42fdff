use std::path::PathBuf;

/// Failure categories, each with its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Data,
    Io,
    Compute,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Data => "data",
            Category::Io => "io",
            Category::Compute => "compute",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Data => 3,
            Category::Io => 4,
            Category::Compute => 5,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Core(#[from] vmbpbb::Error),
}

impl CliError {
    pub fn category(&self) -> Category {
        use vmbpbb::Error as E;
        match self {
            CliError::Config(_) | CliError::Json { .. } => Category::Config,
            CliError::Parse { .. } => Category::Data,
            CliError::Io { .. } | CliError::Csv { .. } => Category::Io,
            CliError::Core(e) => match e {
                E::EmptySeries
                | E::NonFinite { .. }
                | E::InvalidPeriod { .. }
                | E::SeriesTooShort { .. }
                | E::LengthMismatch { .. } => Category::Data,
                E::DegenerateBand { .. } | E::UndefinedCorrelation => Category::Compute,
                _ => Category::Config,
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    pub fn csv(path: impl Into<PathBuf>) -> impl FnOnce(csv::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Csv { path, source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
