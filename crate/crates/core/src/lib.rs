//! Markov-chain-modulated backward SDEs.
//!
//! Solvers and experiments for BSDEs whose driver switches with a
//! continuous-time Markov chain α,
//!
//! ```text
//! Y_t = ξ + ∫_t^T f(s, Y_s, Z_s, α_s) ds − ∫_t^T Z_s dB_s,
//! ```
//!
//! and for their two-time-scale limits when α = α^ε has generator
//! Q^ε = Q̃/ε + Q̂ with Q̃ block-diagonal.
//!
//! ## Modules
//!
//! - [`markov_chain`]: generators, exact path simulation, quasi-stationary
//!   laws ν^k of the fast blocks, the aggregated generator
//!   Q̄ = diag(ν¹, …, ν^l) Q̂ diag(𝟙, …, 𝟙) and occupation-measure rates.
//! - [`bsde`]: backward Euler with least-squares regression (or nested
//!   Monte Carlo) for the conditional expectations, forward diffusions, the
//!   Picard map in the β-weighted norm and a-priori/martingale diagnostics.
//! - [`lq_control`]: coupled Riccati system of the regime-switching LQ
//!   problem and a perturbation certificate of optimality.
//! - [`homogenization`]: averaged driver f̄(t, y, k) = Σ_j ν^k_j f(t, y, s_kj)
//!   and ε-sweeps comparing Y_0^ε with the limit BSDE on shared noise.
//! - [`pde`]: the coupled semilinear parabolic system along a chain path,
//!   Feynman–Kac cross-checks against the FBSDE and the PDE ε-sweep.
//! - [`experiment`]: JSON-configured batch runs behind the `regime-bsde`
//!   binary.
//!
//! [`rng`] derives every random stream from one master seed, so all
//! ensembles are reproducible bit for bit.
//!
//! ## Example
//!
//! ```
//! use regime_bsde::bsde::{solve_backward, BrownianEnsemble, Driver, TerminalCondition, TimeGrid};
//! use regime_bsde::markov_chain::ChainPath;
//!
//! // f = y, ξ = 1: Y_0 = e
//! let grid = TimeGrid::uniform(0.0, 1.0, 200).unwrap();
//! let bm = BrownianEnsemble::sample(&grid, 1, 50, 1).unwrap();
//! let chain = ChainPath::constant(0, 0.0, 1.0);
//! let sol = solve_backward(&Driver::linear(vec![1.0]), &TerminalCondition::constant(vec![1.0]), &bm, &chain).unwrap();
//! assert!((sol.y(0, 0)[0] - std::f64::consts::E).abs() < 0.02 * std::f64::consts::E);
//! ```

pub mod bsde;
pub mod error;
pub mod experiment;
pub mod homogenization;
pub mod lq_control;
pub mod markov_chain;
pub mod pde;
pub mod rng;
pub mod stats;
