use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("Bloch vector has norm {norm}, outside the unit ball")]
    NonPhysicalState { norm: f64 },

    #[error("not a density matrix: {0}")]
    InvalidDensity(String),

    #[error("Choi state is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    InvalidChoi { min_eigenvalue: f64 },

    #[error("Kraus set is invalid: {0}")]
    InvalidKraus(String),

    #[error("{0}")]
    Domain(String),

    #[error("no R_yy completes the parameters to a valid channel (best min eigenvalue {best_min_eigenvalue:e})")]
    Infeasible { best_min_eigenvalue: f64 },

    #[error("stratum {0} has no samples")]
    InsufficientData(String),

    #[error("{0}")]
    Parse(String),

    #[error("{0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable name used in CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonPhysicalState { .. } => "non_physical_state",
            Error::InvalidDensity(_) => "invalid_density",
            Error::InvalidChoi { .. } => "invalid_choi",
            Error::InvalidKraus(_) => "invalid_kraus",
            Error::Domain(_) => "domain",
            Error::Infeasible { .. } => "infeasible",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
