use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the laboratory.
///
/// The variants are grouped so the CLI can map them onto exit codes:
/// configuration problems, numerical faults, and unmet hypotheses of the
/// blow-up theorems are reported differently.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical fault: {0}")]
    NumericalFault(String),

    #[error("conservation violation: {0}")]
    Conservation(String),

    #[error("CFL violation: dt = {dt:e} exceeds the limit; use dt <= {suggested:e}")]
    Cfl { dt: f64, suggested: f64 },

    #[error("quadrature bug: {0}")]
    Quadrature(String),

    #[error("hypothesis violation: {0}")]
    Hypothesis(String),

    #[error("ambiguous singular element: {0}")]
    Ambiguous(String),

    #[error("refusing to step past singular time T* = {t_star:e} (t = {t:e}, dt = {dt:e})")]
    PastSingularTime { t: f64, dt: f64, t_star: f64 },

    #[error("{source} (state dumped to {})", dump.display())]
    WithDump {
        #[source]
        source: Box<Error>,
        dump: PathBuf,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    /// Process exit status used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Contract(_) | Error::Cfl { .. } | Error::Serde(_) => 2,
            Error::NumericalFault(_)
            | Error::Conservation(_)
            | Error::Quadrature(_)
            | Error::PastSingularTime { .. } => 3,
            Error::Hypothesis(_) | Error::Ambiguous(_) => 4,
            Error::WithDump { source, .. } => source.exit_code(),
            Error::Io(_) => 1,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
