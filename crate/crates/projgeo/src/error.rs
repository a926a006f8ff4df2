use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not Hermitian: residual {residual:.3e} exceeds {tol:.3e}")]
    NotHermitian { residual: f64, tol: f64 },

    #[error("matrix is singular: min singular value {min_sv:.3e} <= threshold {threshold:.3e}")]
    Singular { min_sv: f64, threshold: f64 },

    #[error("scalar function undefined or non-finite at eigenvalue {eigenvalue}")]
    FunctionDomain { eigenvalue: f64 },

    #[error("unitary logarithm: spectrum within the branch-cut gap of -1 ({detail})")]
    BranchCut { detail: String },

    #[error("matrix is not unitary: residual {residual:.3e}")]
    NotUnitary { residual: f64 },

    #[error("matrix is not idempotent: residual {residual:.3e} exceeds {tol:.3e}")]
    NotIdempotent { residual: f64, tol: f64 },

    #[error("degenerate idempotent: E+E*-1 has min |eigenvalue| {min_abs_eig:.3e}")]
    Degenerate { min_abs_eig: f64 },

    #[error("matrix is not an orthogonal projection: {detail}")]
    NotProjection { detail: String },

    #[error("matrix is not a reflection: residual {residual:.3e} exceeds {tol:.3e}")]
    NotReflection { residual: f64, tol: f64 },

    #[error("rank decision ambiguous: value {value:.3e} inside tolerance band [{lo:.3e}, {hi:.3e}]")]
    ToleranceBand { value: f64, lo: f64, hi: f64 },

    #[error("degenerate projection geometry: {0}")]
    Geometry(String),

    #[error("iteration failed to converge: {0}")]
    Convergence(String),

    #[error("quadrature undersized: M = {quad} but at least {required} points required")]
    QuadratureUndersized { quad: usize, required: usize },

    #[error("truncated model too coarse: {0}")]
    Truncation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
