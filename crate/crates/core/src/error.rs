use thiserror::Error;

/// Errors raised by the geometry kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    EigenNoConvergence { sweeps: usize, off_norm: f64 },

    #[error("block Cholesky pivot block {block} is not positive definite")]
    PivotNotPositive { block: usize },

    #[error("matrix order {order} is not of the form 2n+1 with n >= 1")]
    NotOddOrder { order: usize },

    #[error("point is not on the normal manifold (corner residual {residual:e})")]
    NotOnManifold { residual: f64 },

    #[error("point is not in the BDI submanifold (residual {residual:e})")]
    NotInSubmanifold { residual: f64 },

    #[error("algebra element is not in the expected subspace (residual {residual:e})")]
    NotInSubspace { residual: f64 },

    #[error("quadrature supports n <= {max}, got n = {n}")]
    UnsupportedDimension { n: usize, max: usize },

    #[error("sample grid (spacing {spacing:e}) is too coarse for step h = {h:e}")]
    GridTooCoarse { spacing: f64, h: f64 },

    #[error("geodesic shooting did not converge after {iterations} iterations (residual {residual:e})")]
    ShootingNoConvergence { iterations: usize, residual: f64 },

    #[error("AHM iteration did not converge after {iterations} iterations (gap {gap:e})")]
    AhmNoConvergence { iterations: usize, gap: f64 },

    #[error("block Cholesky split is inconsistent (residual {residual:e})")]
    InconsistentSplit { residual: f64 },

    #[error("integration produced non-finite values at t = {t}")]
    BlowUp { t: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
