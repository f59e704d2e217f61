//! Euler–Maruyama simulation of the controlled state and trapezoidal
//! quadrature of the quadratic cost, path by path.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bsde::{BrownianEnsemble, TimeGrid};
use crate::error::{Error, Result};
use crate::lq_control::problem::LqProblem;
use crate::lq_control::riccati::FeedbackSolution;
use crate::markov_chain::ChainPath;
use crate::stats::Estimate;

/// What a control law may look at: time, grid node, path index, the current
/// regime and the current state.
#[derive(Debug, Clone, Copy)]
pub struct ControlContext<'a> {
    pub t: f64,
    pub step: usize,
    pub path: usize,
    pub regime: usize,
    pub x: &'a [f64],
}

pub trait ControlLaw: Sync {
    fn control(&self, ctx: &ControlContext<'_>, out: &mut [f64]);
}

/// v ≡ 0.
#[derive(Debug, Clone, Copy)]
pub struct ZeroControl;

impl ControlLaw for ZeroControl {
    fn control(&self, _: &ControlContext<'_>, out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Row-major dense matrix stored flat, for the inner simulation loop.
#[derive(Debug, Clone)]
struct Flat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Flat {
    fn new(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    /// out += self · v
    #[inline]
    fn mul_add(&self, v: &[f64], scale: f64, out: &mut [f64]) {
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            out[i] += scale * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// v' self v
    #[inline]
    fn quad(&self, v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            s += v[i] * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        }
        s
    }
}

/// Linear feedback u = K(t_i, α) x with gains cached at the nodes of a
/// simulation grid.
#[derive(Debug, Clone)]
pub struct FeedbackLaw {
    gains: Vec<Vec<Flat>>,
}

impl FeedbackLaw {
    pub fn new(feedback: &FeedbackSolution, grid: &TimeGrid) -> Self {
        let m = feedback.problem().regimes.len();
        let gains = grid
            .nodes()
            .iter()
            .map(|&t| (0..m).map(|i| Flat::new(&feedback.gain_at(t, i))).collect())
            .collect();
        Self { gains }
    }

    pub fn gain(&self, step: usize, regime: usize) -> DMatrix<f64> {
        let g = &self.gains[step][regime];
        DMatrix::from_row_slice(g.rows, g.cols, &g.data)
    }
}

impl ControlLaw for FeedbackLaw {
    fn control(&self, ctx: &ControlContext<'_>, out: &mut [f64]) {
        out.fill(0.0);
        self.gains[ctx.step][ctx.regime].mul_add(ctx.x, 1.0, out);
    }
}

/// Deterministic open-loop perturbation, piecewise constant on equal pieces
/// of [0, T].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePerturbation {
    pub horizon: f64,
    /// pieces[k] is the value (length n_u) on the k-th piece.
    pub pieces: Vec<Vec<f64>>,
}

impl PiecewisePerturbation {
    pub fn value(&self, t: f64) -> &[f64] {
        let n = self.pieces.len();
        let k = ((t / self.horizon * n as f64).floor() as usize).min(n - 1);
        &self.pieces[k]
    }

    /// ∫_0^T |v|² dt.
    pub fn energy(&self) -> f64 {
        let len = self.horizon / self.pieces.len() as f64;
        self.pieces.iter().map(|p| p.iter().map(|v| v * v).sum::<f64>() * len).sum()
    }
}

/// base + δ·v.
pub struct Perturbed<'a> {
    pub base: &'a dyn ControlLaw,
    pub perturbation: &'a PiecewisePerturbation,
    pub delta: f64,
}

impl ControlLaw for Perturbed<'_> {
    fn control(&self, ctx: &ControlContext<'_>, out: &mut [f64]) {
        self.base.control(ctx, out);
        for (o, v) in out.iter_mut().zip(self.perturbation.value(ctx.t)) {
            *o += self.delta * v;
        }
    }
}

/// Cost sample over paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub se: f64,
    pub per_path: Vec<f64>,
}

impl CostEstimate {
    fn from_paths(per_path: Vec<f64>) -> Self {
        let e = Estimate::from_samples(&per_path);
        Self {
            mean: e.mean,
            se: e.se,
            per_path,
        }
    }
}

#[derive(Debug, Clone)]
struct NodeCoeffs {
    a: Flat,
    b: Flat,
    c: Vec<Flat>,
    d: Vec<Flat>,
    r: Flat,
    n: Flat,
}

/// Coefficients cached on a simulation grid.
pub(crate) struct Simulator<'a> {
    problem: &'a LqProblem,
    grid: TimeGrid,
    nodes: Vec<Vec<NodeCoeffs>>,
    q_term: Vec<Flat>,
    n_x: usize,
    n_u: usize,
    dim: usize,
}

/// Trajectory quantities handed to an observer at each node.
pub(crate) struct NodeView<'a> {
    pub step: usize,
    pub regime: usize,
    pub x: &'a [f64],
    pub u: &'a [f64],
}

impl<'a> Simulator<'a> {
    pub(crate) fn new(problem: &'a LqProblem, grid: &TimeGrid) -> Result<Self> {
        let shape = problem.validate()?;
        let nodes = grid
            .nodes()
            .iter()
            .map(|&t| {
                problem
                    .regimes
                    .iter()
                    .map(|r| {
                        let co = r.at(t);
                        NodeCoeffs {
                            a: Flat::new(&co.a),
                            b: Flat::new(&co.b),
                            c: co.c.iter().map(Flat::new).collect(),
                            d: co.d.iter().map(Flat::new).collect(),
                            r: Flat::new(&co.r),
                            n: Flat::new(&co.n),
                        }
                    })
                    .collect()
            })
            .collect();
        let q_term = problem
            .regimes
            .iter()
            .map(|r| Flat::new(&r.q_term.eval(problem.horizon)))
            .collect();
        Ok(Self {
            problem,
            grid: grid.clone(),
            nodes,
            q_term,
            n_x: shape.n_x,
            n_u: shape.n_u,
            dim: shape.brownian_dim,
        })
    }

    pub(crate) fn check(&self, chains: &[ChainPath], bm: &BrownianEnsemble) -> Result<()> {
        if bm.grid() != &self.grid {
            return Err(Error::DimensionMismatch("Brownian ensemble uses a different grid".into()));
        }
        if (self.grid.horizon() - self.problem.horizon).abs() > 1e-12 * self.problem.horizon.max(1.0) || self.grid.t0() != 0.0
        {
            return Err(Error::DimensionMismatch("simulation grid must span [0, T]".into()));
        }
        if bm.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "problem has {} noise components, ensemble {}",
                self.dim,
                bm.dim()
            )));
        }
        if chains.len() != 1 && chains.len() != bm.n_paths() {
            return Err(Error::DimensionMismatch(format!(
                "{} chain paths for {} Brownian paths",
                chains.len(),
                bm.n_paths()
            )));
        }
        for ch in chains {
            if ch.max_state() >= self.problem.regimes.len() {
                return Err(Error::UnknownState(ch.max_state()));
            }
            if ch.t0() > 0.0 || ch.horizon() < self.problem.horizon {
                return Err(Error::InvalidArgument("chain path does not cover [0, T]".into()));
            }
        }
        Ok(())
    }

    /// Simulate one path; returns its cost. `observe` sees every node.
    pub(crate) fn run_path<F>(&self, law: &dyn ControlLaw, chain: &ChainPath, bm: &BrownianEnsemble, p: usize, mut observe: F) -> f64
    where
        F: FnMut(&NodeView<'_>),
    {
        let n = self.grid.steps();
        let mut x = self.problem.x0.clone();
        let mut u = vec![0.0; self.n_u];
        let mut next = vec![0.0; self.n_x];
        let mut diff = vec![0.0; self.n_x];
        let mut integral = 0.0;
        let mut prev_g = 0.0;
        for i in 0..=n {
            let t = self.grid.t(i);
            let regime = chain.state_at(t);
            let co = &self.nodes[i][regime];
            law.control(
                &ControlContext {
                    t,
                    step: i,
                    path: p,
                    regime,
                    x: &x,
                },
                &mut u,
            );
            observe(&NodeView {
                step: i,
                regime,
                x: &x,
                u: &u,
            });
            let g = co.r.quad(&x) + co.n.quad(&u);
            if i > 0 {
                integral += 0.5 * self.grid.step(i - 1) * (prev_g + g);
            }
            prev_g = g;
            if i == n {
                break;
            }
            let dt = self.grid.step(i);
            next.copy_from_slice(&x);
            co.a.mul_add(&x, dt, &mut next);
            co.b.mul_add(&u, dt, &mut next);
            let inc = bm.increment(p, i);
            for j in 0..self.dim {
                diff.fill(0.0);
                co.c[j].mul_add(&x, 1.0, &mut diff);
                co.d[j].mul_add(&u, 1.0, &mut diff);
                for (o, v) in next.iter_mut().zip(&diff) {
                    *o += v * inc[j];
                }
            }
            std::mem::swap(&mut x, &mut next);
        }
        let terminal = self.q_term[chain.final_state()].quad(&x);
        0.5 * (integral + terminal)
    }

    pub(crate) fn dims(&self) -> (usize, usize) {
        (self.n_u, self.dim)
    }

    pub(crate) fn coeff_matrices(&self, step: usize, regime: usize) -> (DMatrix<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, DMatrix<f64>) {
        let co = &self.nodes[step][regime];
        let to = |f: &Flat| DMatrix::from_row_slice(f.rows, f.cols, &f.data);
        (to(&co.b), co.c.iter().map(to).collect(), co.d.iter().map(to).collect(), to(&co.n))
    }
}

/// J(v) per path with common random numbers: path p uses Brownian path p and
/// chain path p (or the single shared chain path).
pub fn evaluate_cost(
    problem: &LqProblem,
    law: &dyn ControlLaw,
    chains: &[ChainPath],
    brownian: &BrownianEnsemble,
) -> Result<CostEstimate> {
    let sim = Simulator::new(problem, brownian.grid())?;
    sim.check(chains, brownian)?;
    Ok(cost_with(&sim, law, chains, brownian))
}

pub(crate) fn cost_with(sim: &Simulator<'_>, law: &dyn ControlLaw, chains: &[ChainPath], bm: &BrownianEnsemble) -> CostEstimate {
    let per_path: Vec<f64> = (0..bm.n_paths())
        .into_par_iter()
        .map(|p| {
            let chain = if chains.len() == 1 { &chains[0] } else { &chains[p] };
            sim.run_path(law, chain, bm, p, |_| {})
        })
        .collect();
    CostEstimate::from_paths(per_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lq_control::problem::LqRegime;
    use crate::markov_chain::GeneratorMatrix;

    fn problem(regime: LqRegime, x0: f64) -> LqProblem {
        LqProblem {
            regimes: vec![regime],
            generator: GeneratorMatrix::zeros(1),
            horizon: 1.0,
            x0: vec![x0],
            initial_regime: 0,
        }
    }

    #[test]
    fn zero_weights_zero_cost() {
        let p = problem(LqRegime::scalar(0.3, 1.0, 0.2, 0.1, 0.0, 1.0, 0.0), 1.0);
        let g = TimeGrid::uniform(0.0, 1.0, 20).unwrap();
        let bm = BrownianEnsemble::sample(&g, 1, 10, 0).unwrap();
        let chain = [ChainPath::constant(0, 0.0, 1.0)];
        let j = evaluate_cost(&p, &ZeroControl, &chain, &bm).unwrap();
        assert_eq!(j.mean, 0.0);
    }

    #[test]
    fn constant_state_cost() {
        let p = problem(LqRegime::scalar(0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0), 2.0);
        let g = TimeGrid::uniform(0.0, 1.0, 20).unwrap();
        let bm = BrownianEnsemble::sample(&g, 1, 5, 0).unwrap();
        let chain = [ChainPath::constant(0, 0.0, 1.0)];
        let j = evaluate_cost(&p, &ZeroControl, &chain, &bm).unwrap();
        assert!((j.mean - 2.0).abs() < 1e-12);
    }
}
