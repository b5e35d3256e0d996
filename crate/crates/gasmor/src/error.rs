use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("network topology: {0}")]
    Topology(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("degenerate friction factor for variant {variant} (d={d}, k={k}, Re={re})")]
    DegenerateFriction { variant: String, d: f64, k: f64, re: f64 },
    #[error("compressibility out of validity range: z={z} at p={p} Pa, T={t} K")]
    Compressibility { z: f64, p: f64, t: f64 },
    #[error("nonpositive pressure {value} at index {index}")]
    NonPositivePressure { index: usize, value: f64 },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("solution blew up at step {step}")]
    BlowUp { step: usize },
    #[error("steady state did not converge (residual {residual:e})")]
    SteadyNotConverged { residual: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("provenance mismatch: {0}")]
    Provenance(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }
}
