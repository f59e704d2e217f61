use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::StreamKey;

/// Arguments of a driver evaluation. `x` is the current forward state (the
/// Brownian position, or X in forward–backward use); `z` is k×d row-major.
#[derive(Debug, Clone, Copy)]
pub struct DriverArgs<'a> {
    pub t: f64,
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub z: &'a [f64],
    pub state: usize,
}

pub type DriverFn = dyn Fn(&DriverArgs<'_>, &mut [f64]) + Send + Sync;

/// BSDE driver f(t, x, y, z, state) with values in R^k.
#[derive(Clone)]
pub struct Driver {
    f: Arc<DriverFn>,
    k: usize,
    d: usize,
    lipschitz: f64,
    z_independent: bool,
    n_states: Option<usize>,
}

impl fmt::Debug for Driver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Driver")
            .field("k", &self.k)
            .field("d", &self.d)
            .field("lipschitz", &self.lipschitz)
            .field("z_independent", &self.z_independent)
            .field("n_states", &self.n_states)
            .finish()
    }
}

impl Driver {
    /// `lipschitz` is the declared constant μ in (y, z).
    pub fn new<F>(k: usize, d: usize, lipschitz: f64, z_independent: bool, f: F) -> Self
    where
        F: Fn(&DriverArgs<'_>, &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(f),
            k,
            d,
            lipschitz,
            z_independent,
            n_states: None,
        }
    }

    /// Restrict the driver to states 0..n (checked against chain paths).
    pub fn with_states(mut self, n: usize) -> Self {
        self.n_states = Some(n);
        self
    }

    pub fn zero(k: usize, d: usize) -> Self {
        Self::new(k, d, 0.0, true, |_, out| out.fill(0.0))
    }

    /// Scalar driver f(t, y, i) = c_i.
    pub fn state_constant(values: Vec<f64>) -> Self {
        let n = values.len();
        Self::new(1, 1, 0.0, true, move |a, out| out[0] = values[a.state]).with_states(n)
    }

    /// Scalar driver f(t, y, i) = λ_i y.
    pub fn linear(coeffs: Vec<f64>) -> Self {
        let n = coeffs.len();
        let mu = coeffs.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
        Self::new(1, 1, mu, true, move |a, out| out[0] = coeffs[a.state] * a.y[0]).with_states(n)
    }

    /// Scalar driver f = a_i + b_i y + Σ_j g_ij z_j with d Brownian components.
    pub fn affine(constant: Vec<f64>, linear_y: Vec<f64>, linear_z: Vec<Vec<f64>>, d: usize) -> Result<Self> {
        let n = constant.len();
        if linear_y.len() != n || linear_z.len() != n || linear_z.iter().any(|g| g.len() != d) {
            return Err(Error::DimensionMismatch(
                "affine driver needs one coefficient set per state".into(),
            ));
        }
        let z_independent = linear_z.iter().flatten().all(|&g| g == 0.0);
        let mu = (0..n)
            .map(|i| linear_y[i].abs().max(linear_z[i].iter().map(|g| g * g).sum::<f64>().sqrt()))
            .fold(0.0, f64::max);
        Ok(Self::new(1, d, mu, z_independent, move |a, out| {
            let i = a.state;
            let zterm: f64 = linear_z[i].iter().zip(a.z).map(|(g, z)| g * z).sum();
            out[0] = constant[i] + linear_y[i] * a.y[0] + zterm;
        })
        .with_states(n))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn z_independent(&self) -> bool {
        self.z_independent
    }

    pub fn n_states(&self) -> Option<usize> {
        self.n_states
    }

    #[inline]
    pub fn eval_into(&self, args: &DriverArgs<'_>, out: &mut [f64]) {
        (self.f)(args, out)
    }

    pub fn eval(&self, t: f64, x: &[f64], y: &[f64], z: &[f64], state: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        self.eval_into(&DriverArgs { t, x, y, z, state }, &mut out);
        out
    }

    /// Spot-check the declared Lipschitz constant on random points.
    /// Returns the largest observed ratio |Δf| / (|Δy| + |Δz|).
    pub fn observed_lipschitz(&self, n_states: usize, horizon: f64, samples: usize, seed: u64) -> f64 {
        let mut rng = StreamKey::new(seed).label("lipschitz-check").rng();
        let (k, d) = (self.k, self.d);
        let mut worst: f64 = 0.0;
        let draw = |n: usize, rng: &mut crate::rng::StreamRng| -> Vec<f64> {
            (0..n).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect()
        };
        for _ in 0..samples {
            let t = rng.random::<f64>() * horizon;
            let state = rng.random_range(0..n_states);
            let x = draw(d, &mut rng);
            let (y1, y2) = (draw(k, &mut rng), draw(k, &mut rng));
            let (z1, z2) = if self.z_independent {
                (vec![0.0; k * d], vec![0.0; k * d])
            } else {
                (draw(k * d, &mut rng), draw(k * d, &mut rng))
            };
            let f1 = self.eval(t, &x, &y1, &z1, state);
            let f2 = self.eval(t, &x, &y2, &z2, state);
            let df = norm(&f1.iter().zip(&f2).map(|(a, b)| a - b).collect::<Vec<_>>());
            let dy = norm(&y1.iter().zip(&y2).map(|(a, b)| a - b).collect::<Vec<_>>());
            let dz = norm(&z1.iter().zip(&z2).map(|(a, b)| a - b).collect::<Vec<_>>());
            if dy + dz > 0.0 {
                worst = worst.max(df / (dy + dz));
            }
        }
        worst
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

type TerminalFn = dyn Fn(&[f64], usize, &mut [f64]) + Send + Sync;

/// Terminal condition ξ as a function of the forward path (Brownian data
/// only, never the chain).
#[derive(Clone)]
pub struct TerminalCondition {
    f: Arc<TerminalFn>,
    k: usize,
    terminal_only: bool,
    deterministic: bool,
    description: String,
}

impl fmt::Debug for TerminalCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TerminalCondition")
            .field("k", &self.k)
            .field("description", &self.description)
            .finish()
    }
}

impl TerminalCondition {
    pub fn constant(values: Vec<f64>) -> Self {
        let k = values.len();
        Self {
            description: format!("constant {values:?}"),
            f: Arc::new(move |_, _, out| out.copy_from_slice(&values)),
            k,
            terminal_only: true,
            deterministic: true,
        }
    }

    /// ξ = g(X_T).
    pub fn of_terminal<F>(k: usize, description: &str, g: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(move |path, dim, out| g(&path[path.len() - dim..], out)),
            k,
            terminal_only: true,
            deterministic: false,
            description: description.to_string(),
        }
    }

    /// ξ = g(X_{t_0}, …, X_{t_N}); the path is passed flat with `dim`
    /// coordinates per node.
    pub fn of_path<F>(k: usize, description: &str, g: F) -> Self
    where
        F: Fn(&[f64], usize, &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(g),
            k,
            terminal_only: false,
            deterministic: false,
            description: description.to_string(),
        }
    }

    /// ξ = B_T (first coordinate), scalar.
    pub fn brownian_terminal() -> Self {
        Self::of_terminal(1, "B_T", |x, out| out[0] = x[0])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_terminal_only(&self) -> bool {
        self.terminal_only
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn eval_path(&self, path: &[f64], dim: usize, out: &mut [f64]) {
        (self.f)(path, dim, out)
    }

    /// Evaluate on a terminal state only; panics for path-dependent ξ.
    pub fn eval_terminal(&self, x: &[f64], out: &mut [f64]) {
        assert!(self.terminal_only, "path-dependent terminal condition");
        (self.f)(x, x.len(), out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_driver_respects_declared_constant() {
        let f = Driver::linear(vec![1.0, -2.0]);
        assert_eq!(f.lipschitz(), 2.0);
        assert!(f.observed_lipschitz(2, 1.0, 500, 3) <= 2.0 + 1e-12);
    }

    #[test]
    fn affine_driver_z_dependence() {
        let f = Driver::affine(vec![0.0], vec![0.5], vec![vec![0.3]], 1).unwrap();
        assert!(!f.z_independent());
        assert_eq!(f.eval(0.0, &[0.0], &[2.0], &[1.0], 0), vec![1.3]);
        assert!(f.observed_lipschitz(1, 1.0, 500, 1) <= f.lipschitz() + 1e-12);
    }

    #[test]
    fn terminal_conditions() {
        let xi = TerminalCondition::brownian_terminal();
        let mut out = [0.0];
        xi.eval_path(&[0.0, 0.3, -0.7], 1, &mut out);
        assert_eq!(out[0], -0.7);
        let c = TerminalCondition::constant(vec![2.0]);
        assert!(c.is_deterministic());
        c.eval_terminal(&[5.0], &mut out);
        assert_eq!(out[0], 2.0);
    }
}
