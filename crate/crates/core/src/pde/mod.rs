//! Semilinear parabolic systems with a chain-modulated reaction term,
//!
//! ```text
//! −∂_t u = ½σ²(x) ∂²_x u + b(x) ∂_x u + f(t, x, u, ∂_x u σ, α_t),   u(T, ·) = h,
//! ```
//!
//! solved deterministically along each sampled chain path, cross-checked
//! against the forward–backward SDE representation, and swept over ε for
//! a two-time-scale chain against the averaged-reaction limit.

mod feynman_kac;
mod problem;
mod solver;
mod sweep;

pub use feynman_kac::{
    check_probes, feynman_kac_check, feynman_kac_check_against, gradient_identity_check,
    gradient_identity_check_against, growth_ratio, probe_estimates, FeynmanKacReport, FkOptions, GradientReport,
    ProbeComparison, ProbePoint,
};
pub use problem::{PdeGrid, PdeProblem, Reaction, ReactionArgs, ReactionFn, SIGMA_MIN};
pub use solver::{solve_pde, solve_pde_with_nodes, write_solutions_csv, PdeSolution};
pub use sweep::{averaged_reaction, pde_homogenization_sweep, PdeSweepOptions, PdeSweepReport, PdeSweepRung};
