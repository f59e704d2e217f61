//! Post-hoc certification of a feedback law.
//!
//! For a candidate optimum u and an admissible w = u + δ·v the convexity
//! argument of the optimality proof reads
//!
//! ```text
//! J(w) − J(u) ≥ E ∫ (y'B + Σ_j z_j'D_j + u'N)(w − u) dt  (+ strict-convexity term),
//! ```
//!
//! with y = P x and z_j = P(C_j x + D_j u). Three checks are run on common
//! random numbers:
//!
//! - dominance: J(u + δv) ≥ J(u) for random perturbations v and δ ∈ {0.5, 1};
//! - stationarity: the first-order term above vanishes;
//! - convexity gap: J(u + δv) − J(u) ≥ (δ²/2) δ_N ∫|v|² dt, δ_N being the
//!   smallest eigenvalue of N.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bsde::BrownianEnsemble;
use crate::error::{Error, Result};
use crate::lq_control::problem::LqProblem;
use crate::lq_control::riccati::FeedbackSolution;
use crate::lq_control::simulate::{cost_with, FeedbackLaw, Perturbed, PiecewisePerturbation, Simulator};
use crate::markov_chain::{simulate_chain, ChainPath};
use crate::rng::StreamKey;
use crate::stats::Estimate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimalityOptions {
    pub n_perturbations: usize,
    pub deltas: Vec<f64>,
    /// Number of equal time pieces of each perturbation.
    pub pieces: usize,
    /// Statistical tolerance in standard errors.
    pub z_score: f64,
    /// Relative allowance on the convexity lower bound for time
    /// discretization.
    pub convexity_rel_tol: f64,
    pub seed: u64,
}

impl Default for OptimalityOptions {
    fn default() -> Self {
        Self {
            n_perturbations: 100,
            deltas: vec![0.5, 1.0],
            pieces: 4,
            z_score: 3.0,
            convexity_rel_tol: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCheck {
    pub index: usize,
    pub delta: f64,
    /// J(u + δv) − J(u) over paths.
    pub difference: Estimate,
    pub convexity_bound: f64,
    pub dominance_ok: bool,
    pub convexity_ok: bool,
    /// E ∫ (y'B + z'D + u'N) δv dt along the candidate's trajectories.
    pub first_order: Estimate,
    /// Round-off allowance on the first-order term (1e-9 of its summands).
    pub first_order_roundoff: f64,
    pub stationarity_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub cost: Estimate,
    pub value_formula: f64,
    pub delta_n: f64,
    pub comparisons: usize,
    pub dominance_failures: usize,
    pub convexity_failures: usize,
    pub stationarity_failures: usize,
    pub max_first_order_t: f64,
    pub dominance_pass: bool,
    pub stationarity_pass: bool,
    pub convexity_pass: bool,
    pub pass: bool,
    pub checks: Vec<PerturbationCheck>,
}

impl OptimalityReport {
    pub fn summary(&self) -> String {
        format!(
            "dominance {}/{} ok, stationarity {}/{} ok (max |t| {:.2}), convexity {}/{} ok, J(u) = {:.6} ± {:.6}",
            self.comparisons - self.dominance_failures,
            self.comparisons,
            self.comparisons - self.stationarity_failures,
            self.comparisons,
            self.max_first_order_t,
            self.comparisons - self.convexity_failures,
            self.comparisons,
            self.cost.mean,
            self.cost.se
        )
    }
}

/// Independent regime paths for a path ensemble, keyed (seed, "lq-chain", p).
pub fn sample_regime_paths(problem: &LqProblem, n_paths: usize, seed: u64) -> Vec<ChainPath> {
    let key = StreamKey::new(seed).label("lq-chain");
    (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = key.index(p as u64).rng();
            simulate_chain(&problem.generator, problem.initial_regime, 0.0, problem.horizon, &mut rng)
        })
        .collect()
}

pub fn sample_perturbation(n_u: usize, pieces: usize, horizon: f64, seed: u64, index: usize) -> PiecewisePerturbation {
    let mut rng = StreamKey::new(seed).label("lq-perturbation").index(index as u64).rng();
    PiecewisePerturbation {
        horizon,
        pieces: (0..pieces.max(1))
            .map(|_| (0..n_u).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect(),
    }
}

/// Run all checks and return the report whatever the verdict.
pub fn optimality_report(
    problem: &LqProblem,
    feedback: &FeedbackSolution,
    opts: &OptimalityOptions,
    chains: &[ChainPath],
    brownian: &BrownianEnsemble,
) -> Result<OptimalityReport> {
    if opts.n_perturbations == 0 || opts.deltas.is_empty() || opts.pieces == 0 {
        return Err(Error::InvalidArgument("need perturbations, deltas and pieces".into()));
    }
    let sim = Simulator::new(problem, brownian.grid())?;
    sim.check(chains, brownian)?;
    let shape = problem.validate()?;
    let (n_u, dim) = sim.dims();
    let grid = brownian.grid();
    let n = grid.steps();
    let m = problem.regimes.len();
    let law = FeedbackLaw::new(feedback, grid);
    let base = cost_with(&sim, &law, chains, brownian);

    // g(t) = B'Px + Σ D_j'P(C_j x + D_j u) + N u along the candidate's paths
    let p_nodes: Vec<Vec<DMatrix<f64>>> = grid
        .nodes()
        .iter()
        .map(|&t| (0..m).map(|i| feedback.p_at(t, i)).collect())
        .collect();
    let coeffs: Vec<Vec<_>> = (0..=n).map(|s| (0..m).map(|i| sim.coeff_matrices(s, i)).collect()).collect();
    // (g, |B'y| + Σ|D_j'z_j| + |Nu|) per node; the second sizes round-off
    let g_paths: Vec<(Vec<f64>, Vec<f64>)> = (0..brownian.n_paths())
        .into_par_iter()
        .map(|p| {
            let chain = if chains.len() == 1 { &chains[0] } else { &chains[p] };
            let mut g = vec![0.0; (n + 1) * n_u];
            let mut mag = vec![0.0; (n + 1) * n_u];
            sim.run_path(&law, chain, brownian, p, |view| {
                let (b, c, d, nn) = &coeffs[view.step][view.regime];
                let pm = &p_nodes[view.step][view.regime];
                let x = DVector::from_column_slice(view.x);
                let u = DVector::from_column_slice(view.u);
                let y = pm * &x;
                let by = b.transpose() * &y;
                let nu = nn * &u;
                let mut gv = &by + &nu;
                let mut mv = by.abs() + nu.abs();
                for j in 0..dim {
                    let dz = d[j].transpose() * (pm * (&c[j] * &x + &d[j] * &u));
                    mv += dz.abs();
                    gv += dz;
                }
                g[view.step * n_u..(view.step + 1) * n_u].copy_from_slice(gv.as_slice());
                mag[view.step * n_u..(view.step + 1) * n_u].copy_from_slice(mv.as_slice());
            });
            (g, mag)
        })
        .collect();

    let mut checks = Vec::new();
    for k in 0..opts.n_perturbations {
        let v = sample_perturbation(n_u, opts.pieces, problem.horizon, opts.seed, k);
        let first_unit: Vec<f64> = g_paths
            .iter()
            .map(|(g, _)| {
                (0..n)
                    .map(|i| {
                        let vi = v.value(grid.t(i));
                        grid.step(i) * (0..n_u).map(|a| g[i * n_u + a] * vi[a]).sum::<f64>()
                    })
                    .sum()
            })
            .collect();
        let scale: f64 = g_paths
            .iter()
            .map(|(_, mag)| {
                (0..n)
                    .map(|i| {
                        let vi = v.value(grid.t(i));
                        grid.step(i) * (0..n_u).map(|a| mag[i * n_u + a] * vi[a].abs()).sum::<f64>()
                    })
                    .sum::<f64>()
            })
            .sum::<f64>()
            / g_paths.len() as f64;
        for &delta in &opts.deltas {
            let pert = Perturbed {
                base: &law,
                perturbation: &v,
                delta,
            };
            let cost = cost_with(&sim, &pert, chains, brownian);
            let diffs: Vec<f64> = cost.per_path.iter().zip(&base.per_path).map(|(a, b)| a - b).collect();
            let diff = Estimate::from_samples(&diffs);
            let bound = 0.5 * delta * delta * shape.delta * v.energy();
            let round = 1e-12 * base.mean.abs().max(1.0);
            let dominance_ok = diff.mean >= -opts.z_score * diff.se - round;
            let convexity_ok = diff.mean >= bound * (1.0 - opts.convexity_rel_tol) - opts.z_score * diff.se - round;
            let fo: Vec<f64> = first_unit.iter().map(|f| delta * f).collect();
            let first_order = Estimate::from_samples(&fo);
            let roundoff = 1e-9 * delta * scale;
            let stationarity_ok = first_order.mean.abs() <= opts.z_score * first_order.se + roundoff;
            checks.push(PerturbationCheck {
                index: k,
                delta,
                difference: diff,
                convexity_bound: bound,
                dominance_ok,
                convexity_ok,
                first_order,
                first_order_roundoff: roundoff,
                stationarity_ok,
            });
        }
    }
    let count = |f: fn(&PerturbationCheck) -> bool| checks.iter().filter(|c| !f(c)).count();
    let dominance_failures = count(|c| c.dominance_ok);
    let convexity_failures = count(|c| c.convexity_ok);
    let stationarity_failures = count(|c| c.stationarity_ok);
    let max_t = checks
        .iter()
        .map(|c| {
            if c.first_order.se > 0.0 && c.first_order.mean.abs() > c.first_order_roundoff {
                (c.first_order.mean / c.first_order.se).abs()
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    let report = OptimalityReport {
        cost: Estimate::from_samples(&base.per_path),
        value_formula: feedback.value(),
        delta_n: shape.delta,
        comparisons: checks.len(),
        dominance_failures,
        convexity_failures,
        stationarity_failures,
        max_first_order_t: max_t,
        dominance_pass: dominance_failures == 0,
        stationarity_pass: stationarity_failures == 0,
        convexity_pass: convexity_failures == 0,
        pass: dominance_failures == 0 && stationarity_failures == 0 && convexity_failures == 0,
        checks,
    };
    Ok(report)
}

/// As [`optimality_report`], but a failed check is an
/// [`Error::OptimalityViolation`] carrying the report.
pub fn verify_optimality(
    problem: &LqProblem,
    feedback: &FeedbackSolution,
    opts: &OptimalityOptions,
    chains: &[ChainPath],
    brownian: &BrownianEnsemble,
) -> Result<OptimalityReport> {
    let report = optimality_report(problem, feedback, opts, chains, brownian)?;
    if report.pass {
        Ok(report)
    } else {
        Err(Error::OptimalityViolation(Box::new(report)))
    }
}
