use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("config: {0}")]
    ConfigMissing(String),

    #[error("trajectory {index} overflowed at step {step}")]
    Overflow { index: usize, step: usize },

    #[error("truncation: edge population {edge_population:.3e} exceeds {limit:.1e} at kick {kick}")]
    Truncation {
        kick: u64,
        edge_population: f64,
        limit: f64,
    },

    #[error("eigensolver failed on {size}x{size} matrix: {reason}")]
    Eigen { size: usize, reason: String },

    #[error("quadrature order {requested} exceeds limit {limit}")]
    QuadratureOrder { requested: usize, limit: usize },

    #[error("step size {dt} exceeds stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("negativity assembly not Hermitian: deviation {0:.3e}")]
    AssemblyNotHermitian(f64),

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error("grid: {0}")]
    Grid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
