use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("writing output: {0}")]
    Output(String),
    #[error(transparent)]
    Core(#[from] gpsample::Error),
}

impl CliError {
    pub fn config(msg: impl std::fmt::Display) -> Self {
        CliError::Config(msg.to_string())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use gpsample::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } | CliError::Output(_) => EXIT_DATA,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) | E::UnknownBenchmark(_) | E::InvalidDistribution(_) => EXIT_CONFIG,
                E::EmptyData | E::InvalidData(_) | E::DimensionMismatch { .. } => EXIT_DATA,
                E::NotPositiveDefinite { .. }
                | E::FitFailed(_)
                | E::DegenerateVariance(_)
                | E::NoFeasiblePoint
                | E::IterationFailed { .. }
                | E::EmptyCandidates
                | E::SingularStiffness => EXIT_NUMERIC,
            },
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
