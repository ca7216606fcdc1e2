use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("point is not on the phase-space lattice: {0}")]
    OffLattice(String),
    #[error("window is identically zero")]
    ZeroWindow,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("tensor format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("matrix is not symplectic (residual {0:.3e})")]
    NotSymplectic(f64),
    #[error("no quadratic generating phase: {0}")]
    Inadmissible(String),
    #[error("ill-conditioned factorization: {0}")]
    IllConditioned(String),
    #[error("memory cap exceeded: need {needed_mb:.1} MB, cap {cap_mb} MB")]
    MemoryCap { needed_mb: f64, cap_mb: u64 },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("invalid input: {0}")]
    BadInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for failures caused by resource limits rather than bad input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::MemoryCap { .. })
    }
}
