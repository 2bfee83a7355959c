use std::path::PathBuf;

use ctgs_core::corpus::CorpusError;
use ctgs_core::eval::EvalError;
use ctgs_core::{DecodeError, FilterError, LmError};
use thiserror::Error;

pub const EXIT_DOMAIN: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Model(#[from] LmError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Filter(_) => EXIT_USAGE,
            CliError::Decode(DecodeError::Filter(_) | DecodeError::Strategy(_)) => EXIT_USAGE,
            CliError::Eval(EvalError::Filter(_)) => EXIT_USAGE,
            _ => EXIT_DOMAIN,
        }
    }
}
