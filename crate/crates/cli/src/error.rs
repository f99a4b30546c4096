use std::path::PathBuf;

use thiserror::Error;

/// Exit status for usage and input problems.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for failures while processing valid input.
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] polygmdh::Error),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use polygmdh::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Output { .. } => EXIT_RUNTIME,
            CliError::Core(e) => match e {
                E::Io { .. }
                | E::Csv(_)
                | E::RaggedRow { .. }
                | E::BadLabel { .. }
                | E::BadValue { .. }
                | E::MissingLabelColumn(_)
                | E::InvalidArgument(_)
                | E::InvalidBand { .. }
                | E::WindowTooLong { .. }
                | E::Parse { .. }
                | E::Version(_) => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
