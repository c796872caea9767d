use thiserror::Error;

/// Errors raised across the sequential-design toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point:?} lies outside the unit cube [0,1]^{dim}")]
    Domain { point: Vec<f64>, dim: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("correlation matrix is not positive definite with nugget {delta:e}")]
    IllConditioned { delta: f64 },

    #[error("GP fit failed: {0}")]
    Fit(String),

    #[error("level {level} is not attained on the search grid")]
    LevelNotAttained { level: f64 },

    #[error("derivative is undefined at s = 0")]
    DerivativeUndefined,

    #[error("target {0} has no bound rule for branch and bound")]
    UnsupportedTarget(String),

    #[error("cannot split a rectangle with zero volume")]
    DegenerateRectangle,

    #[error("contour point set is empty")]
    EmptyContour,

    #[error("experiment failed: {0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
