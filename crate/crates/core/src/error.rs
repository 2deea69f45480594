use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("normal undefined at corner angle {theta}")]
    CornerNormal { theta: f64 },

    #[error("source {index} lies on the boundary (distance {distance:e})")]
    SingularSource { index: usize, distance: f64 },

    #[error("evaluation point coincides with the pole of wavelet {index}")]
    Pole { index: usize },

    #[error("wavelets {first} and {second} share a source point")]
    DegenerateFamily { first: usize, second: usize },

    #[error("source {source_index} produces a singular entry on segment {segment}")]
    SingularEntry { source_index: usize, segment: usize },

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("point {re}{im:+}i lies outside the domain")]
    OutsideDomain { re: f64, im: f64 },

    #[error("no grid nodes fall inside the domain")]
    DegenerateDomain,

    #[error("config error: {0}")]
    Config(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
