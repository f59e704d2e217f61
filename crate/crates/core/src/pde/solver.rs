//! Backward time stepping for one chain path.
//!
//! Each step [t_n, t_{n+1}] is Strang-split into half a reaction step, a
//! full Crank–Nicolson step of the linear part and another half reaction
//! step:
//!
//! ```text
//! (I − Δ/2 L_h) δ = Δ L_h u,   u ← u + δ          (interior nodes)
//! du/d(−t) = f(t, x, u, ∂_x u σ, α)               (RK4, gradient lagged)
//! ```
//!
//! with L_h the central-difference operator ½σ²D² + bD. Boundary nodes
//! keep their terminal values under the linear part and only feel the
//! reaction, so a space-independent reaction applied to space-constant data
//! stays exactly space-constant. The time grid is the uniform grid merged
//! with the chain's jump times, so the chain is constant on every step.

use std::io::Write;

use crate::error::{Error, Result};
use crate::markov_chain::ChainPath;
use crate::pde::problem::{PdeProblem, ReactionArgs};

/// Jump times closer than this (relative to T) to an existing node are
/// merged into it.
const NODE_MERGE_TOL: f64 = 1e-13;

/// u on (time nodes × space nodes × components) for one chain path.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeSolution {
    times: Vec<f64>,
    xs: Vec<f64>,
    sigma: Vec<f64>,
    k: usize,
    values: Vec<f64>,
    chain: ChainPath,
}

impl PdeSolution {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn chain(&self) -> &ChainPath {
        &self.chain
    }

    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn u(&self, ti: usize, j: usize, c: usize) -> f64 {
        self.values[(ti * self.nx() + j) * self.k + c]
    }

    /// All nodes and components at time level `ti`, node-major.
    pub fn level(&self, ti: usize) -> &[f64] {
        let w = self.nx() * self.k;
        &self.values[ti * w..(ti + 1) * w]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Multiply every value by `factor` (used to build corrupted controls).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// ∂_x u σ at a node: central differences inside, one-sided at the ends.
    pub fn grad_sigma(&self, ti: usize, j: usize, c: usize) -> f64 {
        let n = self.nx();
        let d = if j == 0 {
            (self.u(ti, 1, c) - self.u(ti, 0, c)) / (self.xs[1] - self.xs[0])
        } else if j == n - 1 {
            (self.u(ti, n - 1, c) - self.u(ti, n - 2, c)) / (self.xs[n - 1] - self.xs[n - 2])
        } else {
            (self.u(ti, j + 1, c) - self.u(ti, j - 1, c)) / (self.xs[j + 1] - self.xs[j - 1])
        };
        d * self.sigma[j]
    }

    fn time_bracket(&self, t: f64) -> (usize, usize, f64) {
        let n = self.times.len();
        let tol = NODE_MERGE_TOL * self.times[n - 1].abs().max(1.0);
        let i = self.times.partition_point(|&s| s < t - tol);
        if i >= n {
            return (n - 1, n - 1, 0.0);
        }
        if (self.times[i] - t).abs() <= tol || i == 0 {
            return (i, i, 0.0);
        }
        let w = (t - self.times[i - 1]) / (self.times[i] - self.times[i - 1]);
        (i - 1, i, w)
    }

    fn space_bracket(&self, x: f64) -> (usize, f64) {
        let n = self.nx();
        let h = (self.xs[n - 1] - self.xs[0]) / (n - 1) as f64;
        let j = (((x - self.xs[0]) / h).floor().max(0.0) as usize).min(n - 2);
        let w = ((x - self.xs[j]) / (self.xs[j + 1] - self.xs[j])).clamp(0.0, 1.0);
        (j, w)
    }

    fn interpolate(&self, t: f64, x: f64, at: impl Fn(usize, usize) -> f64) -> f64 {
        let (i0, i1, wt) = self.time_bracket(t);
        let (j, wx) = self.space_bracket(x);
        let row = |i: usize| (1.0 - wx) * at(i, j) + wx * at(i, j + 1);
        if i0 == i1 {
            row(i0)
        } else {
            (1.0 - wt) * row(i0) + wt * row(i1)
        }
    }

    /// u(t, x), bilinear between grid nodes.
    pub fn value_at(&self, t: f64, x: f64, c: usize) -> f64 {
        self.interpolate(t, x, |i, j| self.u(i, j, c))
    }

    /// ∂_x u σ at (t, x), interpolating the nodal differences.
    pub fn grad_sigma_at(&self, t: f64, x: f64, c: usize) -> f64 {
        self.interpolate(t, x, |i, j| self.grad_sigma(i, j, c))
    }

    /// CSV rows (t, x, component, value, path_id).
    pub fn write_csv<W: Write>(&self, out: W, path_id: usize) -> Result<()> {
        write_solutions_csv(out, std::slice::from_ref(self), path_id)
    }
}

/// Several solutions in one CSV, path ids counting up from `first_id`.
pub fn write_solutions_csv<W: Write>(out: W, solutions: &[PdeSolution], first_id: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "x", "component", "value", "path_id"])?;
    for (p, sol) in solutions.iter().enumerate() {
        let id = (first_id + p).to_string();
        for (ti, t) in sol.times.iter().enumerate() {
            for (j, x) in sol.xs.iter().enumerate() {
                for c in 0..sol.k {
                    w.write_record([
                        t.to_string(),
                        x.to_string(),
                        c.to_string(),
                        sol.u(ti, j, c).to_string(),
                        id.clone(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Solve along `chain` on the uniform grid refined at the chain's jumps.
pub fn solve_pde(problem: &PdeProblem, chain: &ChainPath) -> Result<PdeSolution> {
    solve_pde_with_nodes(problem, chain, &[])
}

/// As [`solve_pde`], with `extra_nodes` inserted into the time grid.
pub fn solve_pde_with_nodes(problem: &PdeProblem, chain: &ChainPath, extra_nodes: &[f64]) -> Result<PdeSolution> {
    problem.validate()?;
    let g = *problem.grid();
    let horizon = g.horizon;
    if chain.t0() > 0.0 || chain.horizon() < horizon {
        return Err(Error::InvalidArgument(format!(
            "chain covers [{}, {}], PDE needs [0, {horizon}]",
            chain.t0(),
            chain.horizon()
        )));
    }
    let times = time_nodes(horizon, g.nt, chain, extra_nodes);
    let max_dt = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let lip = problem.reaction().lipschitz();
    if max_dt * lip >= 0.5 {
        return Err(Error::CflViolation { dt: max_dt, lipschitz: lip });
    }

    let (nx, k) = (g.nx, problem.k());
    let xs = g.xs();
    let sigma: Vec<f64> = xs.iter().map(|&x| (problem.sigma())(x)).collect();
    let drift: Vec<f64> = xs.iter().map(|&x| (problem.drift())(x)).collect();
    let h = g.dx();
    // L_h u_j = lo_j u_{j−1} + di_j u_j + up_j u_{j+1}
    let lo: Vec<f64> = (0..nx).map(|j| 0.5 * sigma[j] * sigma[j] / (h * h) - drift[j] / (2.0 * h)).collect();
    let di: Vec<f64> = (0..nx).map(|j| -sigma[j] * sigma[j] / (h * h)).collect();
    let up: Vec<f64> = (0..nx).map(|j| 0.5 * sigma[j] * sigma[j] / (h * h) + drift[j] / (2.0 * h)).collect();

    let n_levels = times.len();
    let width = nx * k;
    let mut values = vec![0.0; n_levels * width];
    let mut u = vec![0.0; width];
    for (j, &x) in xs.iter().enumerate() {
        problem.terminal_into(x, &mut u[j * k..(j + 1) * k]);
    }
    values[(n_levels - 1) * width..].copy_from_slice(&u);

    let mut ws = Workspace::new(nx, k);
    let ctx = StepContext {
        problem,
        xs: &xs,
        sigma: &sigma,
        lo: &lo,
        di: &di,
        up: &up,
        h,
    };
    for n in (0..n_levels - 1).rev() {
        let (ta, tb) = (times[n], times[n + 1]);
        let dt = tb - ta;
        let state = chain.state_at(0.5 * (ta + tb));
        ctx.reaction_half(&mut u, tb, 0.5 * dt, state, &mut ws);
        ctx.diffusion(&mut u, dt, &mut ws);
        ctx.reaction_half(&mut u, ta + 0.5 * dt, 0.5 * dt, state, &mut ws);
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("PDE solution became non-finite at t = {ta}")));
        }
        values[n * width..(n + 1) * width].copy_from_slice(&u);
    }
    Ok(PdeSolution {
        times,
        xs,
        sigma,
        k,
        values,
        chain: chain.clone(),
    })
}

fn time_nodes(horizon: f64, nt: usize, chain: &ChainPath, extra: &[f64]) -> Vec<f64> {
    let mut nodes: Vec<f64> = (0..=nt).map(|i| horizon * i as f64 / nt as f64).collect();
    nodes[nt] = horizon;
    nodes.extend(chain.jump_times().iter().copied().filter(|&t| t > 0.0 && t < horizon));
    nodes.extend(extra.iter().copied().filter(|&t| t > 0.0 && t < horizon));
    nodes.sort_by(|a, b| a.total_cmp(b));
    let tol = NODE_MERGE_TOL * horizon;
    let mut out: Vec<f64> = Vec::with_capacity(nodes.len());
    for t in nodes {
        match out.last() {
            Some(&last) if t - last <= tol => {
                // keep grid nodes exact: the final horizon wins over a jump
                if t == horizon {
                    *out.last_mut().unwrap() = horizon;
                }
            }
            _ => out.push(t),
        }
    }
    out
}

struct Workspace {
    grad: Vec<f64>,
    stage: Vec<f64>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    rhs: Vec<f64>,
    cp: Vec<f64>,
    dp: Vec<f64>,
}

impl Workspace {
    fn new(nx: usize, k: usize) -> Self {
        let w = nx * k;
        Self {
            grad: vec![0.0; w],
            stage: vec![0.0; w],
            k1: vec![0.0; w],
            k2: vec![0.0; w],
            k3: vec![0.0; w],
            k4: vec![0.0; w],
            rhs: vec![0.0; nx],
            cp: vec![0.0; nx],
            dp: vec![0.0; nx],
        }
    }
}

struct StepContext<'a> {
    problem: &'a PdeProblem,
    xs: &'a [f64],
    sigma: &'a [f64],
    lo: &'a [f64],
    di: &'a [f64],
    up: &'a [f64],
    h: f64,
}

impl StepContext<'_> {
    fn eval(&self, t: f64, u: &[f64], grad: &[f64], state: usize, out: &mut [f64]) {
        let k = self.problem.k();
        let r = self.problem.reaction();
        for (j, &x) in self.xs.iter().enumerate() {
            let s = j * k..(j + 1) * k;
            r.eval_into(
                &ReactionArgs {
                    t,
                    x,
                    u: &u[s.clone()],
                    grad: &grad[s.clone()],
                    state,
                },
                &mut out[s],
            );
        }
    }

    fn gradient(&self, u: &[f64], grad: &mut [f64]) {
        let k = self.problem.k();
        let nx = self.xs.len();
        for c in 0..k {
            for j in 0..nx {
                let d = if j == 0 {
                    (u[k + c] - u[c]) / self.h
                } else if j == nx - 1 {
                    (u[j * k + c] - u[(j - 1) * k + c]) / self.h
                } else {
                    (u[(j + 1) * k + c] - u[(j - 1) * k + c]) / (2.0 * self.h)
                };
                grad[j * k + c] = d * self.sigma[j];
            }
        }
    }

    /// RK4 for du/d(−t) = f over [t_start − len, t_start], the gradient
    /// argument frozen at its value on entry.
    fn reaction_half(&self, u: &mut [f64], t_start: f64, len: f64, state: usize, ws: &mut Workspace) {
        if self.problem.reaction().gradient_free() {
            ws.grad.fill(0.0);
        } else {
            self.gradient(u, &mut ws.grad);
        }
        let Workspace {
            grad, stage, k1, k2, k3, k4, ..
        } = ws;
        self.eval(t_start, u, grad, state, k1);
        for (s, (a, b)) in stage.iter_mut().zip(u.iter().zip(k1.iter())) {
            *s = a + 0.5 * len * b;
        }
        self.eval(t_start - 0.5 * len, stage, grad, state, k2);
        for (s, (a, b)) in stage.iter_mut().zip(u.iter().zip(k2.iter())) {
            *s = a + 0.5 * len * b;
        }
        self.eval(t_start - 0.5 * len, stage, grad, state, k3);
        for (s, (a, b)) in stage.iter_mut().zip(u.iter().zip(k3.iter())) {
            *s = a + len * b;
        }
        self.eval(t_start - len, stage, grad, state, k4);
        for i in 0..u.len() {
            u[i] += len / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// Crank–Nicolson in increment form on the interior; Thomas algorithm.
    fn diffusion(&self, u: &mut [f64], dt: f64, ws: &mut Workspace) {
        let k = self.problem.k();
        let nx = self.xs.len();
        let half = 0.5 * dt;
        for c in 0..k {
            let at = |j: usize| u[j * k + c];
            for j in 1..nx - 1 {
                ws.rhs[j] = dt * (self.lo[j] * at(j - 1) + self.di[j] * at(j) + self.up[j] * at(j + 1));
            }
            // forward sweep over interior unknowns 1..nx-2
            for j in 1..nx - 1 {
                let a = if j > 1 { -half * self.lo[j] } else { 0.0 };
                let b = 1.0 - half * self.di[j];
                let cc = if j < nx - 2 { -half * self.up[j] } else { 0.0 };
                let (cprev, dprev) = if j > 1 { (ws.cp[j - 1], ws.dp[j - 1]) } else { (0.0, 0.0) };
                let m = b - a * cprev;
                ws.cp[j] = cc / m;
                ws.dp[j] = (ws.rhs[j] - a * dprev) / m;
            }
            let mut next = 0.0;
            for j in (1..nx - 1).rev() {
                let delta = ws.dp[j] - ws.cp[j] * next;
                ws.rhs[j] = delta;
                next = delta;
            }
            for j in 1..nx - 1 {
                u[j * k + c] += ws.rhs[j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::problem::{PdeGrid, Reaction};

    fn grid(nx: usize, nt: usize) -> PdeGrid {
        PdeGrid {
            horizon: 1.0,
            x_lo: -6.0,
            x_hi: 6.0,
            nx,
            nt,
        }
    }

    #[test]
    fn node_merge_keeps_jumps_and_endpoints() {
        let chain = ChainPath::new(0.0, 1.0, 0, vec![0.25, 0.3], vec![1, 0]).unwrap();
        let nodes = time_nodes(1.0, 4, &chain, &[0.5 + 1e-15]);
        assert_eq!(nodes, vec![0.0, 0.25, 0.3, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn linear_terminal_is_preserved() {
        let p = PdeProblem::new(Reaction::zero(1), |x, out| out[0] = x, grid(121, 50)).with_sigma(|_| 0.7);
        let sol = solve_pde(&p, &ChainPath::constant(0, 0.0, 1.0)).unwrap();
        for (j, &x) in sol.xs().iter().enumerate() {
            assert!((sol.u(0, j, 0) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_sigma_and_cfl_rejected() {
        let p = PdeProblem::new(Reaction::zero(1), |_, out| out[0] = 1.0, grid(21, 10)).with_sigma(|x| x);
        let chain = ChainPath::constant(0, 0.0, 1.0);
        assert!(matches!(solve_pde(&p, &chain), Err(Error::NonEllipticSigma { .. })));
        let p = PdeProblem::new(Reaction::linear(vec![10.0]), |_, out| out[0] = 1.0, grid(21, 10));
        assert!(matches!(solve_pde(&p, &chain), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn interpolation_hits_nodes() {
        let p = PdeProblem::new(Reaction::zero(1), |x, out| out[0] = x * x, grid(13, 4));
        let sol = solve_pde(&p, &ChainPath::constant(0, 0.0, 1.0)).unwrap();
        assert_eq!(sol.value_at(1.0, 2.0, 0), 4.0);
        let mid = sol.value_at(1.0, 1.5, 0);
        assert!((mid - 2.5).abs() < 1e-12);
    }
}
