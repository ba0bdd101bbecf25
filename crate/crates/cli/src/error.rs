use std::fmt;

/// Failure of a command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, configuration or model (exit 2).
    Usage(String),
    /// Reading or writing files (exit 3).
    Io(String),
    /// Numerical failure during simulation or fitting (exit 4).
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<interrupted::Error> for CliError {
    fn from(e: interrupted::Error) -> Self {
        use interrupted::Error as E;
        let msg = e.to_string();
        match e {
            E::Io(_) => CliError::Io(msg),
            E::NotFactorizable { .. } | E::Degenerate(_) | E::MemoryCap(_) | E::Numerical(_) => CliError::Numerical(msg),
            E::InvalidParameter(_)
            | E::UnsupportedDimension(_)
            | E::DppInadmissible { .. }
            | E::Unsupported(_)
            | E::Parse(_)
            | E::Json(_) => CliError::Usage(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a path to I/O errors.
pub fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}
