//! Backward Euler scheme for chain-modulated BSDEs
//!
//! ```text
//! Y_t = ξ + ∫_t^T f(s, X_s, Y_s, Z_s, α_s) ds − ∫_t^T Z_s dB_s
//! ```
//!
//! The chain path α is fixed for the whole solve: every conditional
//! expectation is taken given the entire chain trajectory and the current
//! forward state, so the only statistical estimate is the Brownian-side
//! regression.
//!
//! On each step [t_i, t_{i+1}):
//!
//! ```text
//! Z_i = E[(Y_{i+1} − Ŷ_i) ΔB_iᵀ | X_{t_i}] / Δ_i,     Ŷ_i = E[Y_{i+1} | X_{t_i}]
//! Y_i = Ŷ_i + Σ_s |I_s| f(t_i, X_{t_i}, Y_i, Z_i, a_s)
//! ```
//!
//! where the I_s are the pieces of the step on which the chain sits in state
//! a_s (a single piece when the chain does not jump). The implicit equation
//! in Y_i is solved by fixed-point iteration, which contracts because
//! Δ_i·μ < 1/2 is enforced.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bsde::driver::{Driver, DriverArgs, TerminalCondition};
use crate::bsde::grid::{BrownianEnsemble, ForwardModel, TimeGrid};
use crate::bsde::regression::Regressor;
use crate::error::{Error, Result};
use crate::markov_chain::ChainPath;
use crate::rng::StreamKey;
use crate::stats::exact_mean;

const INNER_TOL: f64 = 1e-12;
const INNER_MAX_ITERS: usize = 50;
/// Below this many paths the per-node work is done serially.
const PAR_THRESHOLD: usize = 512;

/// Default inner sample count of the nested Monte Carlo mode.
pub const NESTED_INNER_DEFAULT: usize = 200;
const NESTED_MAX_STEPS: usize = 10;
const NESTED_MAX_PATHS: usize = 500;
const NESTED_BUDGET: f64 = 5e7;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    /// "regression", "picard-step" or "nested".
    pub method: String,
    /// Largest number of inner fixed-point iterations used at any node.
    pub max_inner_iterations: usize,
    /// Number of (path, node) pairs where the inner iteration hit its cap.
    pub inner_unconverged: usize,
    /// Largest regression design size (including the intercept).
    pub max_regression_columns: usize,
}

/// Sample fields of a solved BSDE on a time grid.
///
/// Layout: Y and M are `n_paths × (N+1) × k`, Z is `n_paths × N × k × d`
/// (Z_i belongs to the step [t_i, t_{i+1})), forward states are
/// `n_paths × (N+1) × state_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct BsdeSolution {
    grid: TimeGrid,
    n_paths: usize,
    k: usize,
    d: usize,
    state_dim: usize,
    y: Vec<f64>,
    z: Vec<f64>,
    m: Vec<f64>,
    states: Vec<f64>,
    increments: Vec<f64>,
    diagnostics: SolveDiagnostics,
}

impl BsdeSolution {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn diagnostics(&self) -> &SolveDiagnostics {
        &self.diagnostics
    }

    /// Y of path p at node i.
    pub fn y(&self, p: usize, i: usize) -> &[f64] {
        let off = (p * (self.steps() + 1) + i) * self.k;
        &self.y[off..off + self.k]
    }

    /// Z of path p on step i, k×d row-major.
    pub fn z(&self, p: usize, i: usize) -> &[f64] {
        let kd = self.k * self.d;
        let off = (p * self.steps() + i) * kd;
        &self.z[off..off + kd]
    }

    /// M_{t_i} = Σ_{j<i} Z_j ΔB_j for path p.
    pub fn m(&self, p: usize, i: usize) -> &[f64] {
        let off = (p * (self.steps() + 1) + i) * self.k;
        &self.m[off..off + self.k]
    }

    pub fn state(&self, p: usize, i: usize) -> &[f64] {
        let off = (p * (self.steps() + 1) + i) * self.state_dim;
        &self.states[off..off + self.state_dim]
    }

    pub fn increment(&self, p: usize, i: usize) -> &[f64] {
        let off = (p * self.steps() + i) * self.d;
        &self.increments[off..off + self.d]
    }

    pub fn y_field(&self) -> &[f64] {
        &self.y
    }

    pub fn z_field(&self) -> &[f64] {
        &self.z
    }

    /// Mutable Z field; M is recomputed by [`BsdeSolution::recompute_martingale`].
    pub fn z_field_mut(&mut self) -> &mut [f64] {
        &mut self.z
    }

    /// First component of Y_{t_0} on every path.
    pub fn y0(&self, component: usize) -> Vec<f64> {
        (0..self.n_paths).map(|p| self.y(p, 0)[component]).collect()
    }

    pub fn recompute_martingale(&mut self) {
        let (n, k, d) = (self.steps(), self.k, self.d);
        for p in 0..self.n_paths {
            for i in 0..n {
                for c in 0..k {
                    let mut inc = 0.0;
                    for j in 0..d {
                        inc += self.z[((p * n + i) * k + c) * d + j] * self.increments[(p * n + i) * d + j];
                    }
                    let base = p * (n + 1) * k;
                    self.m[base + (i + 1) * k + c] = self.m[base + i * k + c] + inc;
                }
            }
        }
    }

    /// CSV with columns path_id, t, y_0.., z_0_0..; Z is empty at t_N.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.write_csv_paths(out, self.n_paths)
    }

    /// As [`write_csv`](Self::write_csv), restricted to the first
    /// `max_paths` paths.
    pub fn write_csv_paths<W: Write>(&self, out: W, max_paths: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["path_id".to_string(), "t".to_string()];
        header.extend((0..self.k).map(|c| format!("y_{c}")));
        for c in 0..self.k {
            header.extend((0..self.d).map(|j| format!("z_{c}_{j}")));
        }
        w.write_record(&header)?;
        let n = self.steps();
        for p in 0..self.n_paths.min(max_paths) {
            for i in 0..=n {
                let mut rec = vec![p.to_string(), format!("{}", self.grid.t(i))];
                rec.extend(self.y(p, i).iter().map(|v| format!("{v}")));
                if i < n {
                    rec.extend(self.z(p, i).iter().map(|v| format!("{v}")));
                } else {
                    rec.extend(std::iter::repeat_n(String::new(), self.k * self.d));
                }
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Chain pieces inside each grid step: (length, state).
pub(crate) fn step_segments(grid: &TimeGrid, chain: &ChainPath) -> Vec<Vec<(f64, usize)>> {
    (0..grid.steps())
        .map(|i| {
            chain
                .segments_in(grid.t(i), grid.t(i + 1))
                .into_iter()
                .map(|s| (s.len(), s.state))
                .collect()
        })
        .collect()
}

pub(crate) fn check_inputs(driver: &Driver, xi: &TerminalCondition, grid: &TimeGrid, d: usize, chain: &ChainPath) -> Result<()> {
    if xi.k() != driver.k() {
        return Err(Error::DimensionMismatch(format!(
            "terminal condition has {} components, driver {}",
            xi.k(),
            driver.k()
        )));
    }
    if driver.d() != d {
        return Err(Error::DimensionMismatch(format!(
            "driver expects {}-dimensional noise, ensemble has {d}",
            driver.d()
        )));
    }
    let mu = driver.lipschitz();
    let step = grid.max_step();
    if step * mu >= 0.5 {
        return Err(Error::StepTooLarge { step, mu });
    }
    let tol = 1e-12 * grid.horizon().abs().max(1.0);
    if chain.t0() > grid.t0() + tol || chain.horizon() < grid.horizon() - tol {
        return Err(Error::InvalidArgument(format!(
            "chain path covers [{}, {}], grid needs [{}, {}]",
            chain.t0(),
            chain.horizon(),
            grid.t0(),
            grid.horizon()
        )));
    }
    if let Some(n) = driver.n_states() {
        if chain.max_state() >= n {
            return Err(Error::UnknownState(chain.max_state()));
        }
    }
    Ok(())
}

enum Mode<'a> {
    Implicit,
    /// Driver arguments frozen at a previous iterate (same layout as the
    /// solution fields).
    Frozen { y: &'a [f64], z: &'a [f64] },
}

/// Solve with X = B (the forward state is the Brownian position).
pub fn solve_backward(
    driver: &Driver,
    xi: &TerminalCondition,
    brownian: &BrownianEnsemble,
    chain: &ChainPath,
) -> Result<BsdeSolution> {
    solve_fbsde(driver, xi, brownian, &ForwardModel::Brownian, chain)
}

/// Solve with a general forward process; the regression basis and the
/// driver's x argument use the forward state.
pub fn solve_fbsde(
    driver: &Driver,
    xi: &TerminalCondition,
    brownian: &BrownianEnsemble,
    forward: &ForwardModel,
    chain: &ChainPath,
) -> Result<BsdeSolution> {
    check_inputs(driver, xi, brownian.grid(), brownian.dim(), chain)?;
    let states = forward.simulate(brownian)?;
    let sd = forward.state_dim(brownian.dim());
    backward_pass(driver, xi, brownian, states, sd, chain, Mode::Implicit)
}

/// One application of the Picard map: the driver is evaluated at the given
/// (y, z) fields instead of the unknowns.
pub(crate) fn frozen_step(
    driver: &Driver,
    xi: &TerminalCondition,
    brownian: &BrownianEnsemble,
    forward: &ForwardModel,
    chain: &ChainPath,
    y: &[f64],
    z: &[f64],
) -> Result<BsdeSolution> {
    let states = forward.simulate(brownian)?;
    let sd = forward.state_dim(brownian.dim());
    backward_pass(driver, xi, brownian, states, sd, chain, Mode::Frozen { y, z })
}

fn backward_pass(
    driver: &Driver,
    xi: &TerminalCondition,
    bm: &BrownianEnsemble,
    states: Vec<f64>,
    sd: usize,
    chain: &ChainPath,
    mode: Mode<'_>,
) -> Result<BsdeSolution> {
    let grid = bm.grid().clone();
    let (n_paths, n, k, d) = (bm.n_paths(), grid.steps(), driver.k(), bm.dim());
    let kd = k * d;
    let segments = step_segments(&grid, chain);
    let mut y = vec![0.0; n_paths * (n + 1) * k];
    let mut z = vec![0.0; n_paths * n * kd];
    let par = n_paths >= PAR_THRESHOLD;

    // terminal values
    {
        let fill = |(p, out): (usize, &mut [f64])| {
            let path = &states[p * (n + 1) * sd..(p + 1) * (n + 1) * sd];
            xi.eval_path(path, sd, &mut out[n * k..(n + 1) * k]);
        };
        if par {
            y.par_chunks_mut((n + 1) * k).enumerate().for_each(fill);
        } else {
            y.chunks_mut((n + 1) * k).enumerate().for_each(fill);
        }
    }

    let mut diag = SolveDiagnostics {
        method: match mode {
            Mode::Implicit => "regression".into(),
            Mode::Frozen { .. } => "picard-step".into(),
        },
        ..Default::default()
    };
    let mut node_states = vec![0.0; n_paths * sd];
    let mut target = vec![0.0; n_paths];
    let mut yhat = vec![0.0; n_paths * k];
    let mut fitted = vec![0.0; n_paths];
    let mut znode = vec![0.0; n_paths * kd];
    let mut ynode = vec![0.0; n_paths * k];

    for i in (0..n).rev() {
        let dt = grid.step(i);
        let t = grid.t(i);
        for p in 0..n_paths {
            let off = (p * (n + 1) + i) * sd;
            node_states[p * sd..(p + 1) * sd].copy_from_slice(&states[off..off + sd]);
        }
        let reg = Regressor::new(&node_states, sd, i);
        diag.max_regression_columns = diag.max_regression_columns.max(reg.n_columns());

        for c in 0..k {
            for p in 0..n_paths {
                target[p] = y[(p * (n + 1) + i + 1) * k + c];
            }
            reg.project(&target, &mut fitted)?;
            for p in 0..n_paths {
                yhat[p * k + c] = fitted[p];
            }
        }
        for c in 0..k {
            for j in 0..d {
                for p in 0..n_paths {
                    let resid = y[(p * (n + 1) + i + 1) * k + c] - yhat[p * k + c];
                    target[p] = resid * bm.increment(p, i)[j] / dt;
                }
                reg.project(&target, &mut fitted)?;
                for p in 0..n_paths {
                    znode[p * kd + c * d + j] = fitted[p];
                }
            }
        }

        let segs = &segments[i];
        let solve_path = |(p, out): (usize, &mut [f64])| -> (usize, bool) {
            let x = &node_states[p * sd..(p + 1) * sd];
            let zp = &znode[p * kd..(p + 1) * kd];
            let base = &yhat[p * k..(p + 1) * k];
            let mut fval = vec![0.0; k];
            match mode {
                Mode::Frozen { y: yf, z: zf } => {
                    let yo = &yf[(p * (n + 1) + i) * k..(p * (n + 1) + i + 1) * k];
                    let zo = &zf[(p * n + i) * kd..(p * n + i + 1) * kd];
                    out.copy_from_slice(base);
                    for &(len, state) in segs {
                        driver.eval_into(&DriverArgs { t, x, y: yo, z: zo, state }, &mut fval);
                        for c in 0..k {
                            out[c] += len * fval[c];
                        }
                    }
                    (0, true)
                }
                Mode::Implicit => {
                    out.copy_from_slice(base);
                    let mut next = vec![0.0; k];
                    for it in 1..=INNER_MAX_ITERS {
                        next.copy_from_slice(base);
                        for &(len, state) in segs {
                            driver.eval_into(&DriverArgs { t, x, y: out, z: zp, state }, &mut fval);
                            for c in 0..k {
                                next[c] += len * fval[c];
                            }
                        }
                        let mut change: f64 = 0.0;
                        for c in 0..k {
                            change = change.max((next[c] - out[c]).abs() / out[c].abs().max(1.0));
                        }
                        out.copy_from_slice(&next);
                        if change <= INNER_TOL {
                            return (it, true);
                        }
                    }
                    (INNER_MAX_ITERS, false)
                }
            }
        };
        let stats: Vec<(usize, bool)> = if par {
            ynode.par_chunks_mut(k).enumerate().map(solve_path).collect()
        } else {
            ynode.chunks_mut(k).enumerate().map(solve_path).collect()
        };
        for (it, ok) in stats {
            diag.max_inner_iterations = diag.max_inner_iterations.max(it);
            if !ok {
                diag.inner_unconverged += 1;
            }
        }
        for p in 0..n_paths {
            y[(p * (n + 1) + i) * k..(p * (n + 1) + i + 1) * k].copy_from_slice(&ynode[p * k..(p + 1) * k]);
            z[(p * n + i) * kd..(p * n + i + 1) * kd].copy_from_slice(&znode[p * kd..(p + 1) * kd]);
        }
    }

    let mut sol = BsdeSolution {
        grid,
        n_paths,
        k,
        d,
        state_dim: sd,
        y,
        z,
        m: vec![0.0; n_paths * (n + 1) * k],
        states,
        increments: bm.increments().to_vec(),
        diagnostics: diag,
    };
    sol.recompute_martingale();
    Ok(sol)
}

/// Nested Monte Carlo reference solver for tiny problems (X = B).
///
/// Every conditional expectation is replaced by an average over `inner`
/// fresh Brownian increments, recursively down to the terminal time, so the
/// cost is `n_paths · inner^N`. No regression is involved, which makes the
/// mode an independent check of the regression solver.
pub fn solve_nested(
    driver: &Driver,
    xi: &TerminalCondition,
    brownian: &BrownianEnsemble,
    chain: &ChainPath,
    inner: usize,
) -> Result<BsdeSolution> {
    let grid = brownian.grid().clone();
    let (n_paths, n, k, d) = (brownian.n_paths(), grid.steps(), driver.k(), brownian.dim());
    check_inputs(driver, xi, &grid, d, chain)?;
    if n > NESTED_MAX_STEPS || n_paths > NESTED_MAX_PATHS {
        return Err(Error::NestedBudgetExceeded(format!(
            "nested mode allows N <= {NESTED_MAX_STEPS} and n_paths <= {NESTED_MAX_PATHS} (got {n}, {n_paths})"
        )));
    }
    let cost = n_paths as f64 * (inner as f64).powi(n as i32);
    if inner == 0 || cost > NESTED_BUDGET {
        return Err(Error::NestedBudgetExceeded(format!(
            "n_paths * inner^N = {cost:e} exceeds {NESTED_BUDGET:e}"
        )));
    }
    if !xi.is_terminal_only() {
        return Err(Error::InvalidArgument(
            "nested mode needs a terminal condition of the terminal state only".into(),
        ));
    }
    let segments = step_segments(&grid, chain);
    let states = ForwardModel::Brownian.simulate(brownian)?;
    let kd = k * d;
    let key = StreamKey::new(brownian.seed()).label("nested");

    let nested = Nested {
        driver,
        xi,
        grid: &grid,
        segments: &segments,
        k,
        d,
        inner,
    };
    let per_path: Vec<(Vec<f64>, Vec<f64>)> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut yp = vec![0.0; (n + 1) * k];
            let mut zp = vec![0.0; n * kd];
            let xs = &states[p * (n + 1) * d..(p + 1) * (n + 1) * d];
            xi.eval_path(xs, d, &mut yp[n * k..]);
            for i in 0..n {
                let mut rng = key.index(p as u64).index(i as u64).rng();
                let (yv, zv) = nested.node(i, &xs[i * d..(i + 1) * d], &mut rng);
                yp[i * k..(i + 1) * k].copy_from_slice(&yv);
                zp[i * kd..(i + 1) * kd].copy_from_slice(&zv);
            }
            (yp, zp)
        })
        .collect();
    let mut y = Vec::with_capacity(n_paths * (n + 1) * k);
    let mut z = Vec::with_capacity(n_paths * n * kd);
    for (yp, zp) in per_path {
        y.extend(yp);
        z.extend(zp);
    }
    let mut sol = BsdeSolution {
        grid,
        n_paths,
        k,
        d,
        state_dim: d,
        y,
        z,
        m: vec![0.0; n_paths * (n + 1) * k],
        states,
        increments: brownian.increments().to_vec(),
        diagnostics: SolveDiagnostics {
            method: "nested".into(),
            ..Default::default()
        },
    };
    sol.recompute_martingale();
    Ok(sol)
}

struct Nested<'a> {
    driver: &'a Driver,
    xi: &'a TerminalCondition,
    grid: &'a TimeGrid,
    segments: &'a [Vec<(f64, usize)>],
    k: usize,
    d: usize,
    inner: usize,
}

impl Nested<'_> {
    /// (Y_i, Z_i) at forward state x.
    fn node<R: Rng>(&self, i: usize, x: &[f64], rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let (k, d) = (self.k, self.d);
        let n = self.grid.steps();
        if i == n {
            let mut out = vec![0.0; k];
            self.xi.eval_terminal(x, &mut out);
            return (out, Vec::new());
        }
        let dt = self.grid.step(i);
        let sd = dt.sqrt();
        let mut incs = Vec::with_capacity(self.inner);
        let mut vals = Vec::with_capacity(self.inner);
        let mut next = vec![0.0; d];
        for _ in 0..self.inner {
            let inc: Vec<f64> = (0..d).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
            for j in 0..d {
                next[j] = x[j] + inc[j];
            }
            let (yv, _) = self.node(i + 1, &next, rng);
            incs.push(inc);
            vals.push(yv);
        }
        let mut yhat = vec![0.0; k];
        let mut z = vec![0.0; k * d];
        for c in 0..k {
            let col: Vec<f64> = vals.iter().map(|v| v[c]).collect();
            yhat[c] = exact_mean(&col);
            for j in 0..d {
                let prod: Vec<f64> = col
                    .iter()
                    .zip(&incs)
                    .map(|(v, inc)| (v - yhat[c]) * inc[j] / dt)
                    .collect();
                z[c * d + j] = exact_mean(&prod);
            }
        }
        let t = self.grid.t(i);
        let mut y = yhat.clone();
        let mut fval = vec![0.0; k];
        for _ in 0..INNER_MAX_ITERS {
            let mut next_y = yhat.clone();
            for &(len, state) in &self.segments[i] {
                self.driver
                    .eval_into(&DriverArgs { t, x, y: &y, z: &z, state }, &mut fval);
                for c in 0..k {
                    next_y[c] += len * fval[c];
                }
            }
            let change = next_y
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
                .fold(0.0, f64::max);
            y = next_y;
            if change <= INNER_TOL {
                break;
            }
        }
        (y, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(steps: usize, paths: usize) -> BrownianEnsemble {
        let g = TimeGrid::uniform(0.0, 1.0, steps).unwrap();
        BrownianEnsemble::sample(&g, 1, paths, 11).unwrap()
    }

    #[test]
    fn constant_terminal_zero_driver_is_exact() {
        let bm = setup(20, 300);
        let chain = ChainPath::constant(0, 0.0, 1.0);
        let sol = solve_backward(&Driver::zero(1, 1), &TerminalCondition::constant(vec![2.5]), &bm, &chain).unwrap();
        assert!(sol.y_field().iter().all(|&v| v == 2.5));
        assert!(sol.z_field().iter().all(|&v| v == 0.0));
        assert!((0..300).all(|p| sol.m(p, 20)[0] == 0.0));
    }

    #[test]
    fn occupation_driver_matches_quadrature() {
        let bm = setup(10, 5);
        let chain = ChainPath::new(0.0, 1.0, 0, vec![0.33, 0.71], vec![1, 0]).unwrap();
        let f = Driver::state_constant(vec![1.0, -2.0]);
        let sol = solve_backward(&f, &TerminalCondition::constant(vec![0.5]), &bm, &chain).unwrap();
        let exact = 0.5 + (0.33 + 0.29) - 2.0 * 0.38;
        assert!((sol.y(0, 0)[0] - exact).abs() < 1e-12);
    }

    #[test]
    fn step_constraint_enforced() {
        let bm = setup(2, 10);
        let chain = ChainPath::constant(0, 0.0, 1.0);
        let err = solve_backward(&Driver::linear(vec![1.0]), &TerminalCondition::constant(vec![1.0]), &bm, &chain);
        assert!(matches!(err, Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn nested_mode_deterministic_case_is_exact() {
        let bm = setup(2, 4);
        let chain = ChainPath::constant(0, 0.0, 1.0);
        let sol = solve_nested(&Driver::zero(1, 1), &TerminalCondition::constant(vec![1.0]), &bm, &chain, 20).unwrap();
        assert!(sol.y_field().iter().all(|&v| v == 1.0));
        assert!(sol.z_field().iter().all(|&v| v == 0.0));
        let too_big = solve_nested(&Driver::zero(1, 1), &TerminalCondition::constant(vec![1.0]), &bm, &chain, 100_000);
        assert!(matches!(too_big, Err(Error::NestedBudgetExceeded(_))));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let bm = setup(2, 2);
        let chain = ChainPath::constant(0, 0.0, 1.0);
        let sol = solve_backward(&Driver::zero(1, 1), &TerminalCondition::brownian_terminal(), &bm, &chain);
        // two paths cannot support the cubic basis
        assert!(matches!(sol, Err(Error::RegressionSingular { .. })));
        let sol = solve_backward(&Driver::zero(1, 1), &TerminalCondition::constant(vec![1.0]), &bm, &chain).unwrap();
        let mut buf = Vec::new();
        sol.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("path_id,t,y_0,z_0_0\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 3);
    }
}
