use std::fmt;
use std::path::Path;

/// Exit codes, one per error class.
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_PARSE: u8 = 4;
pub const EXIT_PARAM: u8 = 5;
pub const EXIT_DISCONNECTED: u8 = 6;
pub const EXIT_DIMENSION: u8 = 7;
pub const EXIT_PRECONDITION: u8 = 8;

#[derive(Debug)]
pub enum CliError {
    Core { context: Option<String>, error: skelmap::Error },
    Usage(String),
    /// The requested cut splits the graph; the result was still written.
    CutDisconnects { component_sizes: Vec<usize> },
}

impl CliError {
    pub fn at(path: &Path, error: skelmap::Error) -> Self {
        CliError::Core { context: Some(path.display().to_string()), error }
    }

    pub fn precondition(&self) -> &str {
        use skelmap::Error as E;
        match self {
            CliError::Core { error, .. } => match error {
                E::InvalidParameter { name, .. } => name,
                E::Disconnected { .. } => "graph_connected",
                E::Unreachable => "distances_complete",
                E::DimensionMismatch(_) => "dimension",
                E::UndefinedCorrelation(_) => "correlation_defined",
                E::UnknownShape(_) => "shape",
                E::Parse(_) | E::Csv(_) | E::Json(_) => "input_format",
                E::Io(_) => "readable_files",
            },
            CliError::Usage(_) => "usage",
            CliError::CutDisconnects { .. } => "cut_keeps_graph_connected",
        }
    }

    pub fn exit_code(&self) -> u8 {
        use skelmap::Error as E;
        match self {
            CliError::Core { error, .. } => match error {
                E::Io(_) => EXIT_IO,
                E::Parse(_) | E::Csv(_) | E::Json(_) => EXIT_PARSE,
                E::InvalidParameter { .. } | E::UnknownShape(_) => EXIT_PARAM,
                E::Disconnected { .. } => EXIT_DISCONNECTED,
                E::DimensionMismatch(_) => EXIT_DIMENSION,
                E::Unreachable | E::UndefinedCorrelation(_) => EXIT_PRECONDITION,
            },
            CliError::Usage(_) => EXIT_USAGE,
            CliError::CutDisconnects { .. } => EXIT_DISCONNECTED,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core { context: Some(c), error } => write!(f, "{c}: {error}")?,
            CliError::Core { context: None, error } => write!(f, "{error}")?,
            CliError::Usage(m) => f.write_str(m)?,
            CliError::CutDisconnects { component_sizes } => {
                write!(f, "cut splits the graph into components of sizes {component_sizes:?}")?
            }
        }
        write!(f, " [precondition: {}]", self.precondition())
    }
}

impl From<skelmap::Error> for CliError {
    fn from(error: skelmap::Error) -> Self {
        CliError::Core { context: None, error }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        skelmap::Error::Io(e).into()
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
