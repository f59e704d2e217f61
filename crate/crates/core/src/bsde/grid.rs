use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamKey;

/// Time nodes t_0 < t_1 < … < t_N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(t0: f64, horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(horizon > t0) {
            return Err(Error::InvalidArgument(format!(
                "uniform grid needs steps >= 1 and horizon > t0 (got {steps}, [{t0}, {horizon}])"
            )));
        }
        let h = (horizon - t0) / steps as f64;
        let mut nodes: Vec<f64> = (0..=steps).map(|i| t0 + i as f64 * h).collect();
        nodes[steps] = horizon;
        Ok(Self { nodes })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("grid nodes must be strictly increasing".into()));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn t(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn step(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    pub fn max_step(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn t0(&self) -> f64 {
        self.nodes[0]
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }
}

/// Gaussian increments ΔB for `n_paths` independent d-dimensional paths.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianEnsemble {
    grid: TimeGrid,
    n_paths: usize,
    dim: usize,
    seed: u64,
    increments: Vec<f64>,
}

impl BrownianEnsemble {
    /// Path p draws from stream (seed, "brownian", p), so any subset of
    /// paths can be regenerated independently.
    pub fn sample(grid: &TimeGrid, dim: usize, n_paths: usize, seed: u64) -> Result<Self> {
        if n_paths == 0 || dim == 0 {
            return Err(Error::InvalidArgument("need n_paths >= 1 and dim >= 1".into()));
        }
        let n = grid.steps();
        let key = StreamKey::new(seed).label("brownian");
        let per_path: Vec<Vec<f64>> = (0..n_paths)
            .into_par_iter()
            .map(|p| {
                let mut rng = key.index(p as u64).rng();
                let mut out = Vec::with_capacity(n * dim);
                for i in 0..n {
                    let sd = grid.step(i).sqrt();
                    for _ in 0..dim {
                        let g: f64 = rng.sample(StandardNormal);
                        out.push(sd * g);
                    }
                }
                out
            })
            .collect();
        Ok(Self {
            grid: grid.clone(),
            n_paths,
            dim,
            seed,
            increments: per_path.concat(),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// ΔB of path p over [t_i, t_{i+1}].
    pub fn increment(&self, p: usize, i: usize) -> &[f64] {
        let n = self.grid.steps();
        let off = (p * n + i) * self.dim;
        &self.increments[off..off + self.dim]
    }

    /// B at every node of path p, flat with `dim` entries per node.
    pub fn path(&self, p: usize) -> Vec<f64> {
        let n = self.grid.steps();
        let mut out = vec![0.0; (n + 1) * self.dim];
        for i in 0..n {
            let inc = self.increment(p, i);
            for j in 0..self.dim {
                out[(i + 1) * self.dim + j] = out[i * self.dim + j] + inc[j];
            }
        }
        out
    }

    pub fn terminal(&self, p: usize) -> Vec<f64> {
        let path = self.path(p);
        path[path.len() - self.dim..].to_vec()
    }
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Forward process whose current value feeds the driver and the regression
/// basis.
#[derive(Clone, Default)]
pub enum ForwardModel {
    /// X = B started at the origin.
    #[default]
    Brownian,
    /// Scalar Euler–Maruyama diffusion dX = b(X) dt + σ(X) dB, X_{t_0} = x0.
    Diffusion {
        x0: f64,
        drift: ScalarFn,
        vol: ScalarFn,
    },
}

impl fmt::Debug for ForwardModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForwardModel::Brownian => write!(f, "Brownian"),
            ForwardModel::Diffusion { x0, .. } => write!(f, "Diffusion {{ x0: {x0} }}"),
        }
    }
}

impl ForwardModel {
    pub fn diffusion<B, S>(x0: f64, drift: B, vol: S) -> Self
    where
        B: Fn(f64) -> f64 + Send + Sync + 'static,
        S: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ForwardModel::Diffusion {
            x0,
            drift: Arc::new(drift),
            vol: Arc::new(vol),
        }
    }

    pub fn state_dim(&self, brownian_dim: usize) -> usize {
        match self {
            ForwardModel::Brownian => brownian_dim,
            ForwardModel::Diffusion { .. } => 1,
        }
    }

    /// Forward states for every path, flat: path-major, then node, then
    /// coordinate.
    pub fn simulate(&self, bm: &BrownianEnsemble) -> Result<Vec<f64>> {
        match self {
            ForwardModel::Brownian => {
                Ok((0..bm.n_paths()).into_par_iter().flat_map_iter(|p| bm.path(p)).collect())
            }
            ForwardModel::Diffusion { x0, drift, vol } => {
                if bm.dim() != 1 {
                    return Err(Error::DimensionMismatch(
                        "scalar diffusion needs a one-dimensional Brownian motion".into(),
                    ));
                }
                let grid = bm.grid();
                let n = grid.steps();
                Ok((0..bm.n_paths())
                    .into_par_iter()
                    .flat_map_iter(|p| {
                        let mut xs = Vec::with_capacity(n + 1);
                        let mut x = *x0;
                        xs.push(x);
                        for i in 0..n {
                            x += drift(x) * grid.step(i) + vol(x) * bm.increment(p, i)[0];
                            xs.push(x);
                        }
                        xs
                    })
                    .collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::Estimate;

    #[test]
    fn uniform_grid_endpoints() {
        let g = TimeGrid::uniform(0.0, 1.0, 3).unwrap();
        assert_eq!(g.steps(), 3);
        assert_eq!(g.horizon(), 1.0);
        assert!(TimeGrid::uniform(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::from_nodes(vec![0.0, 0.5, 0.5]).is_err());
    }

    #[test]
    fn single_increment_variance() {
        let g = TimeGrid::uniform(0.0, 0.25, 1).unwrap();
        let bm = BrownianEnsemble::sample(&g, 1, 20_000, 9).unwrap();
        let sq: Vec<f64> = (0..bm.n_paths()).map(|p| bm.increment(p, 0)[0].powi(2)).collect();
        let e = Estimate::from_samples(&sq);
        assert!((e.mean - 0.25).abs() < 4.0 * e.se);
    }

    #[test]
    fn reproducible_and_path_independent() {
        let g = TimeGrid::uniform(0.0, 1.0, 10).unwrap();
        let a = BrownianEnsemble::sample(&g, 2, 50, 4).unwrap();
        let b = BrownianEnsemble::sample(&g, 2, 50, 4).unwrap();
        assert_eq!(a, b);
        let c = BrownianEnsemble::sample(&g, 2, 10, 4).unwrap();
        assert_eq!(a.increment(7, 3), c.increment(7, 3));
    }

    #[test]
    fn diffusion_requires_scalar_noise() {
        let g = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
        let bm = BrownianEnsemble::sample(&g, 2, 3, 0).unwrap();
        let m = ForwardModel::diffusion(0.0, |_| 0.0, |_| 1.0);
        assert!(m.simulate(&bm).is_err());
    }
}
