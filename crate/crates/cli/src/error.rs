use safety_bounds::Error as CoreError;
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_UNSAFE: u8 = 2;
pub const EXIT_INCONCLUSIVE: u8 = 3;
pub const EXIT_CONTRADICTORY: u8 = 4;
pub const EXIT_IO: u8 = 10;
pub const EXIT_MALFORMED: u8 = 11;
pub const EXIT_NO_RECORDS: u8 = 12;
pub const EXIT_BAD_EVIDENCE: u8 = 13;
pub const EXIT_USAGE: u8 = 64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("config {path}: {reason}")]
    Config { path: String, reason: String },

    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => EXIT_USAGE,
            CliError::Write { .. } => EXIT_IO,
            CliError::Core(e) => match e {
                CoreError::Io { .. } => EXIT_IO,
                CoreError::MalformedRecord { .. } => EXIT_MALFORMED,
                CoreError::NoRecords(_) => EXIT_NO_RECORDS,
                CoreError::InvalidEvidence(_) => EXIT_BAD_EVIDENCE,
                CoreError::ContradictoryBounds { .. } => EXIT_CONTRADICTORY,
                CoreError::UnknownStrategy { .. } => EXIT_USAGE,
                _ => EXIT_FAILURE,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
