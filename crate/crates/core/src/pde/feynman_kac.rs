//! Cross-validation of the PDE solver against the forward–backward system
//!
//! ```text
//! X_s = x + ∫_t^s b(X_r) dr + ∫_t^s σ(X_r) dB_r,
//! Y_s = h(X_T) + ∫_s^T f(r, X_r, Y_r, Z_r, α_r) dr − ∫_s^T Z_r dB_r,
//! ```
//!
//! for which u(t, x) = Y_t and ∂_x u(t, x) σ(x) = Z_t along a fixed chain
//! path. Each probe runs its own Euler–Maruyama ensemble started at (t, x)
//! and solves the BSDE with the regression basis in X.

use serde::{Deserialize, Serialize};

use crate::bsde::{initial_estimates, solve_fbsde, BrownianEnsemble, ForwardModel, InitialEstimates, TimeGrid};
use crate::error::{Error, Result};
use crate::markov_chain::ChainPath;
use crate::pde::problem::PdeProblem;
use crate::pde::solver::{solve_pde, PdeSolution};
use crate::rng::StreamKey;
use crate::stats::Estimate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbePoint {
    pub t: f64,
    pub x: f64,
}

impl ProbePoint {
    pub fn new(t: f64, x: f64) -> Self {
        Self { t, x }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FkOptions {
    /// Monte Carlo paths per probe, split evenly over `batches`.
    pub n_mc: usize,
    /// Independent replicate solves per probe; the standard error is the
    /// spread of the batch estimates, so regression noise is included.
    pub batches: usize,
    /// Euler–Maruyama steps from the probe time to T.
    pub steps: usize,
    /// Scheme-bias allowance, relative to |u|.
    pub rel_tol: f64,
    /// Relative tolerance of the gradient identity.
    pub grad_rel_tol: f64,
    /// Standard errors allowed on top of the relative allowance.
    pub z_score: f64,
    pub seed: u64,
}

impl Default for FkOptions {
    fn default() -> Self {
        Self {
            n_mc: 10_000,
            batches: 10,
            steps: 100,
            rel_tol: 2e-2,
            grad_rel_tol: 0.1,
            z_score: 3.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeComparison {
    pub t: f64,
    pub x: f64,
    pub component: usize,
    /// PDE side: u(t, x), or ∂_x u σ for the gradient check.
    pub pde: f64,
    /// BSDE side with its Monte Carlo standard error.
    pub bsde: Estimate,
    pub discrepancy: f64,
    pub allowance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeynmanKacReport {
    pub probes: Vec<ProbeComparison>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub probes: Vec<ProbeComparison>,
    /// max over the grid of (|u| + |∂_x u σ|) / (1 + |x|).
    pub growth_ratio: f64,
    pub pass: bool,
}

/// Probes must sit inside the domain, at least 10% of its width from
/// either end, with t in [0, T).
pub fn check_probes(problem: &PdeProblem, probes: &[ProbePoint]) -> Result<()> {
    let g = problem.grid();
    let margin = 0.1 * g.width();
    if probes.is_empty() {
        return Err(Error::InvalidArgument("no probe points given".into()));
    }
    for p in probes {
        if !(p.x >= g.x_lo + margin && p.x <= g.x_hi - margin) {
            return Err(Error::InvalidArgument(format!(
                "probe x = {} closer than 10% of the width to the boundary of [{}, {}]",
                p.x, g.x_lo, g.x_hi
            )));
        }
        if !(p.t >= 0.0 && p.t < g.horizon) {
            return Err(Error::InvalidArgument(format!("probe t = {} outside [0, {})", p.t, g.horizon)));
        }
    }
    Ok(())
}

/// Solve the forward–backward system started at the probe, once per
/// batch, and combine the batch estimates.
pub fn probe_estimates(
    problem: &PdeProblem,
    chain: &ChainPath,
    probe: ProbePoint,
    index: usize,
    opts: &FkOptions,
) -> Result<InitialEstimates> {
    if opts.batches < 2 || opts.n_mc < 2 * opts.batches {
        return Err(Error::InvalidArgument(format!(
            "need at least two batches of two paths (n_mc = {}, batches = {})",
            opts.n_mc, opts.batches
        )));
    }
    let grid = TimeGrid::uniform(probe.t, problem.grid().horizon, opts.steps)?;
    let forward = ForwardModel::Diffusion {
        x0: probe.x,
        drift: problem.drift().clone(),
        vol: problem.sigma().clone(),
    };
    let driver = problem.reaction().to_driver();
    let xi = problem.terminal_condition();
    let per_batch = opts.n_mc / opts.batches;
    let key = StreamKey::new(opts.seed).label("feynman-kac").index(index as u64);
    let mut ys: Vec<Vec<f64>> = Vec::new();
    let mut zs: Vec<Vec<f64>> = Vec::new();
    for b in 0..opts.batches {
        let bm = BrownianEnsemble::sample(&grid, 1, per_batch, key.index(b as u64).seed())?;
        let sol = solve_fbsde(&driver, &xi, &bm, &forward, chain)?;
        let est = initial_estimates(&sol, &driver, chain);
        ys.push(est.y.iter().map(|e| e.mean).collect());
        zs.push(est.z.iter().map(|e| e.mean).collect());
    }
    let combine = |rows: &[Vec<f64>]| -> Vec<Estimate> {
        (0..rows[0].len())
            .map(|c| {
                let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
                let e = Estimate::from_samples(&col);
                Estimate {
                    n: per_batch * opts.batches,
                    ..e
                }
            })
            .collect()
    };
    Ok(InitialEstimates {
        y: combine(&ys),
        z: combine(&zs),
    })
}

fn compare(t: f64, x: f64, c: usize, pde: f64, bsde: Estimate, rel: f64, z: f64) -> ProbeComparison {
    let discrepancy = (pde - bsde.mean).abs();
    let allowance = z * bsde.se + rel * pde.abs();
    ProbeComparison {
        t,
        x,
        component: c,
        pde,
        bsde,
        discrepancy,
        allowance,
        pass: discrepancy <= allowance,
    }
}

/// Solve the PDE along `chain` and compare u with Y at every probe.
pub fn feynman_kac_check(
    problem: &PdeProblem,
    chain: &ChainPath,
    probes: &[ProbePoint],
    opts: &FkOptions,
) -> Result<FeynmanKacReport> {
    check_probes(problem, probes)?;
    let pde = solve_pde(problem, chain)?;
    feynman_kac_check_against(problem, chain, probes, opts, &pde)
}

/// Compare a given PDE field (possibly not produced by the solver) with
/// the BSDE side.
pub fn feynman_kac_check_against(
    problem: &PdeProblem,
    chain: &ChainPath,
    probes: &[ProbePoint],
    opts: &FkOptions,
    pde: &PdeSolution,
) -> Result<FeynmanKacReport> {
    check_probes(problem, probes)?;
    let mut out = Vec::new();
    for (i, &p) in probes.iter().enumerate() {
        let est = probe_estimates(problem, chain, p, i, opts)?;
        for c in 0..problem.k() {
            out.push(compare(p.t, p.x, c, pde.value_at(p.t, p.x, c), est.y[c], opts.rel_tol, opts.z_score));
        }
    }
    Ok(FeynmanKacReport {
        pass: out.iter().all(|r| r.pass),
        probes: out,
    })
}

pub fn gradient_identity_check(
    problem: &PdeProblem,
    chain: &ChainPath,
    probes: &[ProbePoint],
    opts: &FkOptions,
) -> Result<GradientReport> {
    check_probes(problem, probes)?;
    let pde = solve_pde(problem, chain)?;
    gradient_identity_check_against(problem, chain, probes, opts, &pde)
}

/// Z at each probe against the central-difference ∂_x u σ of `pde`.
pub fn gradient_identity_check_against(
    problem: &PdeProblem,
    chain: &ChainPath,
    probes: &[ProbePoint],
    opts: &FkOptions,
    pde: &PdeSolution,
) -> Result<GradientReport> {
    check_probes(problem, probes)?;
    let mut out = Vec::new();
    for (i, &p) in probes.iter().enumerate() {
        let est = probe_estimates(problem, chain, p, i, opts)?;
        for c in 0..problem.k() {
            let g = pde.grad_sigma_at(p.t, p.x, c);
            out.push(compare(p.t, p.x, c, g, est.z[c], opts.grad_rel_tol, opts.z_score));
        }
    }
    Ok(GradientReport {
        pass: out.iter().all(|r| r.pass),
        growth_ratio: growth_ratio(pde),
        probes: out,
    })
}

/// max over time levels, nodes and components of (|u| + |∂_x u σ|)/(1 + |x|).
pub fn growth_ratio(pde: &PdeSolution) -> f64 {
    let mut worst: f64 = 0.0;
    for ti in 0..pde.times().len() {
        for (j, &x) in pde.xs().iter().enumerate() {
            for c in 0..pde.k() {
                let r = (pde.u(ti, j, c).abs() + pde.grad_sigma(ti, j, c).abs()) / (1.0 + x.abs());
                worst = worst.max(r);
            }
        }
    }
    worst
}
