use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid generator {q} for circulant graph of order {n} (need 1 <= q < n/2, strictly increasing)")]
    InvalidGenerator { n: usize, q: usize },

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid k = {k} for k-NN graph on {n} points (need k < n)")]
    InvalidK { n: usize, k: usize },

    #[error("vertex {0} is isolated; normalized Laplacian is undefined")]
    IsolatedVertex(usize),

    #[error("graph is disconnected after {attempts} attempts")]
    Disconnected { attempts: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("nonzero entry ({i}, {j}) at graph distance {width:?} violates shift locality")]
    WidthViolation {
        i: usize,
        j: usize,
        /// `None` when the two vertices lie in different components.
        width: Option<usize>,
    },

    #[error("shifts {a} and {b} do not commute (commutator norm {norm:e})")]
    NonCommuting { a: usize, b: usize, norm: f64 },

    #[error("filter does not commute with shift {k} (commutator norm {norm:e})")]
    FilterNotCommuting { k: usize, norm: f64 },

    #[error("joint spectrum is not distinct")]
    NonDistinctSpectrum,

    #[error("triangularization residual {residual:e} exceeds tolerance {tol:e}")]
    TriangularizationResidual { residual: f64, tol: f64 },

    #[error("dense size {n} exceeds cap {cap}")]
    DenseCapExceeded { n: usize, cap: usize },

    #[error("degree {degree} exceeds cap {cap}")]
    DegreeCapExceeded { degree: usize, cap: usize },

    #[error("filter is singular at spectrum points {points:?}")]
    SingularFilter { points: Vec<usize> },

    #[error("integrand 1/h is singular: h vanishes at {0:?}")]
    SingularIntegrand(Vec<f64>),

    #[error("quadrature did not converge: max coefficient change {change:e} at q = {q}")]
    QuadratureNotConverged { q: usize, change: f64 },

    #[error("repeated root near {0}; partial fractions need simple roots")]
    RepeatedRoot(f64),

    #[error("zero root; 1/h has no expansion in 1/(1 - b t)")]
    ZeroRoot,

    #[error("ARMA stability violated: |b_k| * ||S||_2 = {value} >= 1 (root index {index})")]
    ArmaUnstable { index: usize, value: f64 },

    #[error("need at least {needed} error samples above noise, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("filter is not positive definite on the spectrum box (min value {0})")]
    NotPositiveDefinite(f64),

    #[error("operator not supported here: {0}")]
    Unsupported(String),

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse {
        line: usize,
        col: usize,
        msg: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
