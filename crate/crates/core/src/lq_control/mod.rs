//! Regime-switching linear-quadratic control: problem data, the coupled
//! Riccati feedback, Monte Carlo cost evaluation and post-hoc optimality
//! certification.

mod problem;
mod riccati;
mod simulate;
mod verify;

pub use problem::{LqProblem, LqRegime, LqShape, TimeFn, TimeMatrix};
pub use riccati::{solve_optimal, solve_optimal_with_steps, FeedbackSolution, RICCATI_STEPS};
pub use simulate::{
    evaluate_cost, ControlContext, ControlLaw, CostEstimate, FeedbackLaw, PiecewisePerturbation, Perturbed,
    ZeroControl,
};
pub use verify::{
    optimality_report, sample_perturbation, sample_regime_paths, verify_optimality, OptimalityOptions,
    OptimalityReport, PerturbationCheck,
};
