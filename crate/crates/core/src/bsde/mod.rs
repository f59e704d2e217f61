//! Chain-modulated BSDEs: drivers and terminal conditions, time grids and
//! Brownian ensembles, the regression-based backward Euler solver (with a
//! nested Monte Carlo reference mode), Picard iteration in the β-norm and
//! solution diagnostics.

mod diagnostics;
mod driver;
mod grid;
mod picard;
mod regression;
mod solver;

pub use diagnostics::{
    a_priori_stats, initial_estimates, martingale_residual_check, martingale_residual_check_with, APrioriStats,
    InitialEstimates, MartingaleReport,
};
pub use driver::{Driver, DriverArgs, DriverFn, TerminalCondition};
pub use grid::{BrownianEnsemble, ForwardModel, ScalarFn, TimeGrid};
pub use picard::{beta_distance, default_beta, picard_solve, picard_solve_fbsde, ContractionReport, PicardOptions};
pub use solver::{solve_backward, solve_fbsde, solve_nested, BsdeSolution, SolveDiagnostics, NESTED_INNER_DEFAULT};
