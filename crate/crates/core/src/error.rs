use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degree {degree} exceeds the symbol degree bound {max}")]
    DegreeOverflow { degree: u32, max: u32 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("cannot parse symbol: {0}")]
    Parse(String),

    #[error("imaginary residue {residue:e} exceeds tolerance {tol:e}")]
    ImaginaryResidue { residue: f64, tol: f64 },

    #[error("operator is not Hermitian (residual {0:e})")]
    NonHermitian(f64),

    #[error("kernel has zero trace")]
    ZeroTrace,

    #[error("requested |p| up to {requested} exceeds the Nyquist limit {nyquist}")]
    NyquistExceeded { requested: f64, nyquist: f64 },

    #[error("basis dimension {dim} too small for degree {degree}")]
    DimensionTooSmall { dim: usize, degree: u32 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("grid coverage: {0}")]
    Coverage(String),

    #[error("integrand does not decay at the grid boundary (relative magnitude {0:e})")]
    BoundaryLeak(f64),

    #[error("normalization integral {0} is not 1")]
    Normalization(f64),

    #[error("evaluation routes disagree by {0:e}")]
    RouteDisagreement(f64),

    #[error("average {0} is not positive")]
    NonPositiveAverage(f64),

    #[error("resolution self-check failed: results moved by {0:e}")]
    ResolutionCheck(f64),

    #[error("quadrature instability: {0}")]
    QuadratureInstability(String),

    #[error("symbol fit residual {0:e} too large")]
    FitResidual(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
