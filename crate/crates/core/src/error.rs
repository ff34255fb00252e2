use thiserror::Error;

/// Errors raised by the simulator and its analytic companions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid point count {0} is not a power of two >= 8")]
    GridSize(usize),
    #[error("box length must be positive and finite, got {0}")]
    BoxLength(f64),
    #[error("momentum {0} is not on the lattice")]
    OffLattice(f64),
    #[error("momentum window {window} exceeds the lattice cutoff {cutoff}")]
    Window { window: f64, cutoff: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    #[error("energy {energy} outside the admissible range ({lo}, {hi})")]
    EnergyRange { energy: f64, lo: f64, hi: f64 },
    #[error("singular matching at interface {0}")]
    SingularMatching(usize),
    #[error("signal analysis failed: {0}")]
    Signal(String),
    #[error("numerical invariant violated: {0}")]
    Invariant(String),
    #[error("config error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("config validation: field `{field}` {reason}")]
    Validation { field: String, reason: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Error {
    Error::Parameter {
        name,
        reason: reason.into(),
    }
}
