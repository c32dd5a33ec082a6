use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{field}`{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Validation {
        field: String,
        line: Option<usize>,
        message: String,
    },

    #[error(
        "omega = {omega:e} rad/s is within the pole guard of the resonance at {resonance:e} rad/s"
    )]
    Pole { omega: f64, resonance: f64 },

    #[error("surface-resonance asymptote at omega = {omega:e} rad/s: 1 - mu_perp*mu_par vanishes")]
    BranchDegenerate { omega: f64 },

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("truncation exceeded: population {population:e} in the outermost Fock shell")]
    Truncation { population: f64 },

    #[error("storage channels overlap: |D| = {magnitude:e} exceeds {limit}")]
    Overlap { magnitude: f64, limit: f64 },
}

impl Error {
    pub(crate) fn validation(field: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.to_string(),
            line: None,
            message: message.into(),
        }
    }

    pub(crate) fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }
}
