use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// The variants fall into three families that the CLI maps onto exit codes:
/// input problems (parse, validation, unknown devices), numerical failures,
/// and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("unknown {kind} `{id}`")]
    UnknownDevice { kind: &'static str, id: String },

    #[error("power flow did not converge after {iterations} iterations (mismatch {mismatch:.3e} pu)")]
    NonConvergence { iterations: usize, mismatch: f64 },

    #[error("singular matrix in {context} (pivot at {location})")]
    Singular { context: String, location: String },

    #[error("network islanded: {0}")]
    Islanding(String),

    #[error("motor `{id}` cannot be initialized: {reason}")]
    MotorStall { id: String, reason: String },

    #[error("generator `{id}` needs Q = {q:.4} pu above its limit {q_max:.4} pu")]
    ReactiveLimit { id: String, q: f64, q_max: f64 },

    #[error("state diverged at t = {t:.4} s: {detail}")]
    Divergence { t: f64, detail: String },

    #[error("inconsistent initialization: {0}")]
    Inconsistent(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse failure family, used for process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numerical,
    Io,
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parse(_) | Error::Validation { .. } | Error::UnknownDevice { .. } => {
                ErrorClass::Input
            }
            Error::Io { .. } => ErrorClass::Io,
            _ => ErrorClass::Numerical,
        }
    }

    /// The operating point has no valid steady state (sampling discards it).
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::ReactiveLimit { .. } | Error::MotorStall { .. }
        )
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "parse",
            Error::Validation { .. } => "validation",
            Error::UnknownDevice { .. } => "unknown_device",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Singular { .. } => "singular",
            Error::Islanding(_) => "islanding",
            Error::MotorStall { .. } => "motor_stall",
            Error::ReactiveLimit { .. } => "reactive_limit",
            Error::Divergence { .. } => "divergence",
            Error::Inconsistent(_) => "inconsistent",
            Error::InsufficientData(_) => "insufficient_data",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
