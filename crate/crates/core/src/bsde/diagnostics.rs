//! A priori statistics and martingale-residual diagnostics of a solved BSDE.
//!
//! The a priori bound controls E sup_t |Y_t|² + E ∫ |Z_t|² dt; the residual
//! check verifies the discrete identity
//!
//! ```text
//! Y_{t_i} − Y_{t_{i+1}} − Σ_s |I_s| f(…) + Z_i ΔB_i = r_i
//! ```
//!
//! and tests that the martingale increments ΔM_i = Z_i ΔB_i are uncorrelated
//! with the regression basis at t_i, and that the residuals r_i carry no
//! component along ΔB_i (which is what a corrupted Z leaves behind).

use serde::{Deserialize, Serialize};

use crate::bsde::driver::{Driver, DriverArgs};
use crate::bsde::regression::{basis, basis_len};
use crate::bsde::solver::{step_segments, BsdeSolution};
use crate::markov_chain::ChainPath;
use crate::stats::Estimate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct APrioriStats {
    pub sup_y2: Estimate,
    pub int_z2: Estimate,
    /// Per-path sum sup|Y|² + ∫|Z|², averaged.
    pub combined: Estimate,
}

pub fn a_priori_stats(sol: &BsdeSolution) -> APrioriStats {
    let n = sol.steps();
    let grid = sol.grid();
    let mut sup = Vec::with_capacity(sol.n_paths());
    let mut int = Vec::with_capacity(sol.n_paths());
    for p in 0..sol.n_paths() {
        let s = (0..=n)
            .map(|i| sol.y(p, i).iter().map(|v| v * v).sum::<f64>())
            .fold(0.0, f64::max);
        let z: f64 = (0..n)
            .map(|i| grid.step(i) * sol.z(p, i).iter().map(|v| v * v).sum::<f64>())
            .sum();
        sup.push(s);
        int.push(z);
    }
    let comb: Vec<f64> = sup.iter().zip(&int).map(|(a, b)| a + b).collect();
    APrioriStats {
        sup_y2: Estimate::from_samples(&sup),
        int_z2: Estimate::from_samples(&int),
        combined: Estimate::from_samples(&comb),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub max_abs_residual: f64,
    pub rms_residual: f64,
    /// Largest |t|-statistic of E[ΔM_i φ(X_{t_i})] over nodes, components
    /// and basis functions (constant included).
    pub max_increment_t: f64,
    /// Largest |t|-statistic of E[r_i ΔB_i φ(X_{t_i})] over the same set.
    pub max_residual_t: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// |t| for the sample mean of xs, with `extra_se` added in quadrature;
/// zero when the sample is identically zero.
fn t_stat(xs: &[f64], extra_se: f64) -> f64 {
    let e = Estimate::from_samples(xs);
    let se = e.se.hypot(extra_se);
    if e.mean == 0.0 {
        0.0
    } else if se == 0.0 {
        f64::INFINITY
    } else {
        (e.mean / se).abs()
    }
}

/// Orthogonality test at |t| ≤ 4.
pub fn martingale_residual_check(sol: &BsdeSolution, driver: &Driver, chain: &ChainPath) -> MartingaleReport {
    martingale_residual_check_with(sol, driver, chain, 4.0)
}

pub fn martingale_residual_check_with(
    sol: &BsdeSolution,
    driver: &Driver,
    chain: &ChainPath,
    threshold: f64,
) -> MartingaleReport {
    let grid = sol.grid();
    let (n, k, d, sd, np) = (sol.steps(), sol.k(), sol.d(), sol.state_dim(), sol.n_paths());
    let segments = step_segments(grid, chain);
    let q = basis_len(sd) + 1;
    let mut max_abs: f64 = 0.0;
    let mut sum_sq = 0.0;
    let mut max_inc_t: f64 = 0.0;
    let mut max_res_t: f64 = 0.0;
    let mut fval = vec![0.0; k];
    let mut phi = Vec::with_capacity(q);
    for i in 0..n {
        let t = grid.t(i);
        let mut feats = Vec::with_capacity(np);
        let mut dm = vec![vec![0.0; np]; k];
        let mut res = vec![vec![0.0; np]; k];
        for p in 0..np {
            basis(sol.state(p, i), &mut phi);
            phi.insert(0, 1.0);
            feats.push(phi.clone());
            let mut drift = vec![0.0; k];
            for &(len, state) in &segments[i] {
                driver.eval_into(
                    &DriverArgs {
                        t,
                        x: sol.state(p, i),
                        y: sol.y(p, i),
                        z: sol.z(p, i),
                        state,
                    },
                    &mut fval,
                );
                for c in 0..k {
                    drift[c] += len * fval[c];
                }
            }
            for c in 0..k {
                let inc: f64 = (0..d).map(|j| sol.z(p, i)[c * d + j] * sol.increment(p, i)[j]).sum();
                let r = sol.y(p, i)[c] - sol.y(p, i + 1)[c] - drift[c] + inc;
                dm[c][p] = inc;
                res[c][p] = r;
                max_abs = max_abs.max(r.abs());
                sum_sq += r * r;
            }
        }
        for c in 0..k {
            for b in 0..q {
                let prod: Vec<f64> = (0..np).map(|p| dm[c][p] * feats[p][b]).collect();
                max_inc_t = max_inc_t.max(t_stat(&prod, 0.0));
                for j in 0..d {
                    let prod: Vec<f64> = (0..np)
                        .map(|p| res[c][p] * sol.increment(p, i)[j] * feats[p][b])
                        .collect();
                    // For a correct Z the sample mean of r ΔB φ equals that of
                    // Z φ (ΔB² − Δ) (normal equations), whose fluctuation is
                    // added to the standard error.
                    let chi: Vec<f64> = (0..np)
                        .map(|p| {
                            let db = sol.increment(p, i)[j];
                            sol.z(p, i)[c * d + j] * feats[p][b] * (db * db - grid.step(i))
                        })
                        .collect();
                    let extra = Estimate::from_samples(&chi).se;
                    max_res_t = max_res_t.max(t_stat(&prod, extra));
                }
            }
        }
    }
    let rms = (sum_sq / (n * k * np).max(1) as f64).sqrt();
    MartingaleReport {
        max_abs_residual: max_abs,
        rms_residual: rms,
        max_increment_t: max_inc_t,
        max_residual_t: max_res_t,
        threshold,
        pass: max_inc_t <= threshold && max_res_t <= threshold,
    }
}

/// Monte Carlo estimates of Y and Z at the first node, with standard
/// errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialEstimates {
    /// Per component: mean over paths of ξ + Σ_i Σ_s |I_s| f(…) along the
    /// solved path.
    pub y: Vec<Estimate>,
    /// Per component and noise coordinate (k×d row-major): mean of
    /// (Y_{t_1} − Ȳ_{t_1}) ΔB_0 / Δ_0.
    pub z: Vec<Estimate>,
}

/// Pathwise estimators of (Y_{t_0}, Z_{t_0}); meaningful when every path
/// starts from the same forward state.
pub fn initial_estimates(sol: &BsdeSolution, driver: &Driver, chain: &ChainPath) -> InitialEstimates {
    let grid = sol.grid();
    let (n, k, d, np) = (sol.steps(), sol.k(), sol.d(), sol.n_paths());
    let segments = step_segments(grid, chain);
    let mut fval = vec![0.0; k];
    let mut ys = vec![vec![0.0; np]; k];
    for p in 0..np {
        let mut acc: Vec<f64> = sol.y(p, n).to_vec();
        for i in 0..n {
            for &(len, state) in &segments[i] {
                driver.eval_into(
                    &DriverArgs {
                        t: grid.t(i),
                        x: sol.state(p, i),
                        y: sol.y(p, i),
                        z: sol.z(p, i),
                        state,
                    },
                    &mut fval,
                );
                for c in 0..k {
                    acc[c] += len * fval[c];
                }
            }
        }
        for c in 0..k {
            ys[c][p] = acc[c];
        }
    }
    let dt = grid.step(0);
    let mut z = Vec::with_capacity(k * d);
    for c in 0..k {
        let y1: Vec<f64> = (0..np).map(|p| sol.y(p, 1)[c]).collect();
        let mean = crate::stats::exact_mean(&y1);
        for j in 0..d {
            let s: Vec<f64> = (0..np).map(|p| (y1[p] - mean) * sol.increment(p, 0)[j] / dt).collect();
            z.push(Estimate::from_samples(&s));
        }
    }
    InitialEstimates {
        y: ys.iter().map(|v| Estimate::from_samples(v)).collect(),
        z,
    }
}
