//! Standard-library companion to `parsql-core`: file IO, configuration,
//! checkpoints, reports, and the command implementations behind the `parsql`
//! binary.
//!
//! The split keeps the algorithmic core free of platform concerns: the core
//! crate owns grammar, decoding, alignment, and training; this crate owns
//! paths, bytes, clocks, and process exit codes.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod report;
pub mod runner;

use core::fmt;

/// Process-level failure, split by exit code: configuration problems exit
/// with 2, runtime problems with 3.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad config file, missing inputs. Exit code 2.
    Config(String),
    /// Failures while doing the work: malformed data files, incompatible
    /// checkpoints, decode or training errors. Exit code 3.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn config(msg: impl Into<String>) -> CliError {
        CliError::Config(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> CliError {
        CliError::Runtime(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<parsql_core::corpus::CorpusError> for CliError {
    fn from(e: parsql_core::corpus::CorpusError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<parsql_core::decoder::DecodeError> for CliError {
    fn from(e: parsql_core::decoder::DecodeError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<parsql_core::train::TrainError> for CliError {
    fn from(e: parsql_core::train::TrainError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<parsql_core::align::AlignError> for CliError {
    fn from(e: parsql_core::align::AlignError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<parsql_core::gen::GenError> for CliError {
    fn from(e: parsql_core::gen::GenError) -> Self {
        match e {
            // A generated example failing preparation is a bug at runtime;
            // everything else the generator rejects is configuration.
            parsql_core::gen::GenError::Corpus(inner) => CliError::Runtime(inner.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}
