use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("visibility undefined: N_max + N_min = 0")]
    UndefinedVisibility,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("underdetermined fit: {points} distinct points for {params} parameters")]
    Underdetermined { points: usize, params: usize },

    #[error("fit did not converge after {iterations} iterations")]
    FitNotConverged { iterations: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("schema error at line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Schema { .. } => 2,
            Error::InvalidArgument(_)
            | Error::Domain { .. }
            | Error::UndefinedVisibility
            | Error::DegenerateData(_)
            | Error::Underdetermined { .. } => 3,
            Error::FitNotConverged { .. } => 4,
            Error::Io { .. } => 5,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks `lo <= value <= hi` (and that `value` is not NaN).
pub(crate) fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value >= lo && value <= hi {
        Ok(())
    } else {
        let domain = match (lo == 0.0, hi == 1.0, hi.is_infinite()) {
            (true, true, _) => "[0, 1]",
            (true, _, true) => "[0, inf)",
            _ => "its allowed interval",
        };
        Err(Error::Domain {
            name,
            value,
            domain,
        })
    }
}

pub(crate) fn check_non_negative(name: &'static str, value: f64) -> Result<()> {
    check_range(name, value, 0.0, f64::INFINITY)
}

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    check_range(name, value, 0.0, 1.0)
}
