use std::fmt;

/// Failure of a subcommand, split by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration, arguments or input data. Exit status 1.
    Validation(String),
    /// The filesystem or network failed. Exit status 2.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<heliomap::Error> for CliError {
    fn from(e: heliomap::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a path to an I/O failure.
pub fn io_err(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
