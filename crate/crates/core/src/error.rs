use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("field shape mismatch: {0}")]
    Shape(String),
    #[error("coefficients are not Hermitian-symmetric (max violation {violation:.3e})")]
    NotHermitian { violation: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("velocity field is not admissible: barotropic divergence {residual:.3e}")]
    Inadmissible { residual: f64 },
    #[error("noise ensemble resolves wavenumber {kmax} but the grid Nyquist limit is {nyquist}")]
    Unresolved { kmax: i64, nyquist: usize },
    #[error("noise increment has {got} entries, expected {expected}")]
    IncrementLength { expected: usize, got: usize },
    #[error("non-finite value detected at t = {t} (step {step})")]
    BlowUp { t: f64, step: u64 },
    #[error("Serrin monitor integral {integral:.6e} exceeded its threshold at t = {t}")]
    MonitorTripped { integral: f64, t: f64 },
    #[error("diagnostics records are not time-ordered at index {0}")]
    Disordered(usize),
    #[error("parameters are not admissible: {}", .0.join("; "))]
    NotAdmissible(Vec<String>),
    #[error("format error: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
