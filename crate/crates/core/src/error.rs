use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite parameter value at index {index}: {value}")]
    NonFiniteParameter { index: usize, value: f64 },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("failed to read data from {path}: {source}")]
    DataIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to parse CSV: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid inverse temperature {0}; expected a value in (0, 1]")]
    InvalidTemperature(f64),

    #[error("sample size {0} is too small; at least 2 observations are required")]
    SampleSizeTooSmall(usize),

    #[error("invalid sampler configuration: {0}")]
    InvalidChainConfig(String),

    #[error("could not find a finite starting point after {attempts} attempts (chain {chain})")]
    InitializationFailed { chain: usize, attempts: usize },

    #[error("series too short: {len} values, at least {min} required")]
    SeriesTooShort { len: usize, min: usize },

    #[error("at least {min} chains are required, got {got}")]
    TooFewChains { min: usize, got: usize },

    #[error("chains have unequal lengths")]
    UnequalChainLengths,

    #[error("at least {min} draws are required, got {got}")]
    TooFewDraws { min: usize, got: usize },

    #[error("draws were sampled at t = {found} but t_w(n) = {expected}")]
    TemperatureMismatch { expected: f64, found: f64 },

    #[error("invalid temperature ladder: {0}")]
    InvalidLadder(String),

    #[error("every prior draw has zero likelihood; log-mean-exp is not representable")]
    LikelihoodUnderflow,

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("singular matrix in {0}")]
    SingularMatrix(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid experiment config: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure classes used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Sampler,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::InvalidChainConfig(_) | Error::InvalidLadder(_)
            | Error::InvalidHyperparameter(_) => ErrorClass::Config,
            Error::InvalidDataset(_) | Error::DataIo { .. } | Error::Csv(_)
            | Error::SampleSizeTooSmall(_) | Error::Io { .. } => ErrorClass::Data,
            _ => ErrorClass::Sampler,
        }
    }

    /// Process exit code: 1 config error, 2 data error, 3 sampler failure.
    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Config => 1,
            ErrorClass::Data => 2,
            ErrorClass::Sampler => 3,
        }
    }
}
