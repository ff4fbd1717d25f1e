use std::fmt;

/// Failure of a CLI run, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, inputs or files. Exit code 2.
    Config(String),
    /// A numerical routine failed. Exit code 3.
    Numeric(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    /// Error for the config field at `path`, e.g. `method.sigma`.
    pub fn field(path: &str, msg: impl fmt::Display) -> Self {
        Self::Config(format!("{path}: {msg}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Numeric(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<wtca::Error> for CliError {
    fn from(e: wtca::Error) -> Self {
        use wtca::Error as E;
        match e {
            E::NonFinite { .. } | E::Oracle { .. } | E::Regression { .. } | E::EmptyFamily(_) => Self::Numeric(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Config(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
