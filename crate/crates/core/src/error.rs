use thiserror::Error;

use crate::lq_control::OptimalityReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("negative off-diagonal rate q[{row}][{col}] = {value}")]
    NegativeRate { row: usize, col: usize, value: f64 },

    #[error("row {row} sums to {sum}, expected 0")]
    RowSumViolation { row: usize, sum: f64 },

    #[error("generator is not weakly irreducible: {0}")]
    NotWeaklyIrreducible(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid two-scale generator: {0}")]
    InvalidTwoScale(String),

    #[error("state {0} is not covered by the partition")]
    UnknownState(usize),

    #[error("time step {step} violates step*mu < 1/2 (mu = {mu})")]
    StepTooLarge { step: f64, mu: f64 },

    #[error("regression singular at node {node}: {paths} paths for {columns} basis columns")]
    RegressionSingular {
        node: usize,
        paths: usize,
        columns: usize,
    },

    #[error("Picard iteration stopped contracting at iteration {0}")]
    NoConvergence(usize),

    #[error("nested Monte Carlo budget exceeded: {0}")]
    NestedBudgetExceeded(String),

    #[error("expected jump count {expected} per path exceeds cap {cap}")]
    JumpBudgetExceeded { expected: f64, cap: f64 },

    #[error("Riccati solution blew up at t = {t} (norm {norm})")]
    RiccatiBlowup { t: f64, norm: f64 },

    #[error("invalid LQ problem: {0}")]
    InvalidProblem(String),

    #[error("optimality verification failed: {}", .0.summary())]
    OptimalityViolation(Box<OptimalityReport>),

    #[error("driver depends on z; averaging requires a z-independent driver")]
    ZDependentDriver,

    #[error("reaction depends on the gradient; homogenization requires a gradient-free reaction")]
    GradientDependentReaction,

    #[error("reaction step {dt} * Lipschitz {lipschitz} >= 0.5")]
    CflViolation { dt: f64, lipschitz: f64 },

    #[error("diffusion coefficient degenerates at x = {x} (sigma = {sigma})")]
    NonEllipticSigma { x: f64, sigma: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("unknown experiment kind `{0}`")]
    UnknownKind(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
