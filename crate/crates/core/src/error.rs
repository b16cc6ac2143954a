use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid ellipticity constants: need 0 < lambda <= Lambda, got ({lower}, {upper})")]
    Ellipticity { lower: f64, upper: f64 },
    #[error("truncation index {k} out of range 1..={n}")]
    Truncation { k: usize, n: usize },
    #[error("invalid operator: {0}")]
    Operator(String),
    #[error("control matrix {index} has eigenvalues [{min}, {max}] outside the band [{lower}, {upper}]")]
    ControlOutsideBand {
        index: usize,
        min: f64,
        max: f64,
        lower: f64,
        upper: f64,
    },
    #[error("coefficient {name} = {value} violates its declared bound at t = {t}")]
    CoefficientBound { name: &'static str, value: f64, t: f64 },
    #[error("normalized p-Laplacian evaluated at zero gradient")]
    ZeroGradient,
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("invalid barrier parameters: {0}")]
    Barrier(String),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("time step {dt} exceeds the monotonicity bound {max_dt}")]
    Cfl { dt: f64, max_dt: f64 },
    #[error("non-finite value at step {step}, node {node}")]
    Blowup { step: usize, node: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
