use thiserror::Error;

/// Errors produced by model construction, fitting, and inference.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("scatter matrix is not positive definite{}", detail_suffix(.0))]
    NotPositiveDefinite(Option<String>),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("component {component} collapsed: responsibility mass {mass:.6} is below the minimum {min_mass:.6}")]
    DegenerateComponent {
        component: usize,
        mass: f64,
        min_mass: f64,
    },

    #[error("log-likelihood became non-finite at iteration {iteration}")]
    NonFiniteLogLik { iteration: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("all {attempted} restarts failed; last error: {last}")]
    AllRestartsFailed { attempted: usize, last: String },

    #[error("empty cluster in k-means initialization")]
    EmptyCluster,

    #[error(
        "information matrix is numerically singular \
         (reciprocal condition number {rcond:.3e} below 1e-12); standard errors refused"
    )]
    SingularInformation { rcond: f64 },

    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn detail_suffix(detail: &Option<String>) -> String {
    match detail {
        Some(d) => format!(" ({d})"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
