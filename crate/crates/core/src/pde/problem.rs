use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bsde::{Driver, ScalarFn, TerminalCondition};
use crate::error::{Error, Result};

/// Smallest |σ(x)| accepted on the grid.
pub const SIGMA_MIN: f64 = 1e-6;

/// Arguments of a reaction evaluation at one grid node. `grad` holds
/// ∂_x u·σ(x), one entry per component.
#[derive(Debug, Clone, Copy)]
pub struct ReactionArgs<'a> {
    pub t: f64,
    pub x: f64,
    pub u: &'a [f64],
    pub grad: &'a [f64],
    pub state: usize,
}

pub type ReactionFn = dyn Fn(&ReactionArgs<'_>, &mut [f64]) + Send + Sync;

/// Reaction term f(t, x, u, ∂_x u σ, state) with values in R^k.
#[derive(Clone)]
pub struct Reaction {
    f: Arc<ReactionFn>,
    k: usize,
    lipschitz: f64,
    gradient_free: bool,
}

impl fmt::Debug for Reaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Reaction")
            .field("k", &self.k)
            .field("lipschitz", &self.lipschitz)
            .field("gradient_free", &self.gradient_free)
            .finish()
    }
}

impl Reaction {
    /// `lipschitz` bounds the dependence on (u, grad); `gradient_free`
    /// promises that `grad` is ignored.
    pub fn new<F>(k: usize, lipschitz: f64, gradient_free: bool, f: F) -> Self
    where
        F: Fn(&ReactionArgs<'_>, &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            f: Arc::new(f),
            k,
            lipschitz,
            gradient_free,
        }
    }

    pub fn zero(k: usize) -> Self {
        Self::new(k, 0.0, true, |_, out| out.fill(0.0))
    }

    /// Scalar linear reaction c_state · u.
    pub fn linear(coeffs: Vec<f64>) -> Self {
        let lip = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        Self::new(1, lip, true, move |a, out| out[0] = coeffs[a.state] * a.u[0])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn gradient_free(&self) -> bool {
        self.gradient_free
    }

    pub fn eval_into(&self, args: &ReactionArgs<'_>, out: &mut [f64]) {
        (self.f)(args, out)
    }

    /// The same function read as a BSDE driver over a scalar forward state:
    /// f(t, X, y, z, state) with z = ∂_x u σ.
    pub fn to_driver(&self) -> Driver {
        let r = self.clone();
        Driver::new(self.k, 1, self.lipschitz, self.gradient_free, move |a, out| {
            r.eval_into(
                &ReactionArgs {
                    t: a.t,
                    x: a.x[0],
                    u: a.y,
                    grad: a.z,
                    state: a.state,
                },
                out,
            )
        })
    }
}

/// Truncated space–time domain [0, T] × [x_lo, x_hi] with `nx` space
/// points and `nt` uniform time steps (before jump alignment).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeGrid {
    pub horizon: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub nx: usize,
    pub nt: usize,
}

impl PdeGrid {
    pub fn dx(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.nx - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        if j + 1 == self.nx {
            self.x_hi
        } else {
            self.x_lo + j as f64 * self.dx()
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.x(j)).collect()
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }
}

pub type TerminalDataFn = dyn Fn(f64, &mut [f64]) + Send + Sync;

/// Semilinear system −∂_t u = ½σ²∂²_x u + b ∂_x u + f(t, x, u, ∂_x u σ, α_t)
/// on [0, T) × (x_lo, x_hi), u(T, ·) = h, with u = h held on the boundary.
#[derive(Clone)]
pub struct PdeProblem {
    drift: ScalarFn,
    sigma: ScalarFn,
    terminal: Arc<TerminalDataFn>,
    reaction: Reaction,
    grid: PdeGrid,
}

impl fmt::Debug for PdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PdeProblem")
            .field("reaction", &self.reaction)
            .field("grid", &self.grid)
            .finish()
    }
}

impl PdeProblem {
    /// Driftless problem with σ ≡ 1; see [`with_drift`](Self::with_drift)
    /// and [`with_sigma`](Self::with_sigma).
    pub fn new<H>(reaction: Reaction, terminal: H, grid: PdeGrid) -> Self
    where
        H: Fn(f64, &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            drift: Arc::new(|_| 0.0),
            sigma: Arc::new(|_| 1.0),
            terminal: Arc::new(terminal),
            reaction,
            grid,
        }
    }

    pub fn with_drift<B: Fn(f64) -> f64 + Send + Sync + 'static>(mut self, b: B) -> Self {
        self.drift = Arc::new(b);
        self
    }

    pub fn with_sigma<S: Fn(f64) -> f64 + Send + Sync + 'static>(mut self, s: S) -> Self {
        self.sigma = Arc::new(s);
        self
    }

    pub fn with_reaction(mut self, reaction: Reaction) -> Self {
        self.reaction = reaction;
        self
    }

    pub fn with_grid(mut self, grid: PdeGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn grid(&self) -> &PdeGrid {
        &self.grid
    }

    pub fn reaction(&self) -> &Reaction {
        &self.reaction
    }

    pub fn k(&self) -> usize {
        self.reaction.k
    }

    pub fn drift(&self) -> &ScalarFn {
        &self.drift
    }

    pub fn sigma(&self) -> &ScalarFn {
        &self.sigma
    }

    pub fn terminal_into(&self, x: f64, out: &mut [f64]) {
        (self.terminal)(x, out)
    }

    /// h(X_T) as a BSDE terminal condition.
    pub fn terminal_condition(&self) -> TerminalCondition {
        let h = self.terminal.clone();
        TerminalCondition::of_terminal(self.k(), "h(X_T)", move |x, out| h(x[0], out))
    }

    /// Grid sanity, finiteness of b, σ, h on the grid and uniform
    /// ellipticity |σ| ≥ SIGMA_MIN.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.nx < 3 || g.nt == 0 || !(g.x_hi > g.x_lo) || !(g.horizon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "PDE grid needs nx >= 3, nt >= 1, x_hi > x_lo and T > 0 (got {g:?})"
            )));
        }
        if self.k() == 0 {
            return Err(Error::InvalidArgument("reaction has no components".into()));
        }
        let mut h = vec![0.0; self.k()];
        for x in g.xs() {
            let s = (self.sigma)(x);
            if !s.is_finite() || s.abs() < SIGMA_MIN {
                return Err(Error::NonEllipticSigma { x, sigma: s });
            }
            if !(self.drift)(x).is_finite() {
                return Err(Error::InvalidArgument(format!("drift is not finite at x = {x}")));
            }
            self.terminal_into(x, &mut h);
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("terminal data is not finite at x = {x}")));
            }
        }
        Ok(())
    }
}
