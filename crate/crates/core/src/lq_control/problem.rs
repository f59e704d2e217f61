use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov_chain::GeneratorMatrix;

/// A scalar function of time: a constant or polynomial coefficients
/// c_0 + c_1 t + c_2 t² + …
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeFn {
    Constant(f64),
    Polynomial(Vec<f64>),
}

impl TimeFn {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFn::Constant(c) => *c,
            TimeFn::Polynomial(cs) => cs.iter().rev().fold(0.0, |acc, c| acc * t + c),
        }
    }
}

/// Matrix of time functions, serialized as nested rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<TimeFn>>", into = "Vec<Vec<TimeFn>>")]
pub struct TimeMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<TimeFn>,
}

impl TryFrom<Vec<Vec<TimeFn>>> for TimeMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<TimeFn>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("matrix rows must be nonempty and of equal length".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            entries: rows.into_iter().flatten().collect(),
        })
    }
}

impl From<TimeMatrix> for Vec<Vec<TimeFn>> {
    fn from(m: TimeMatrix) -> Self {
        m.entries.chunks(m.cols).map(<[TimeFn]>::to_vec).collect()
    }
}

impl TimeMatrix {
    pub fn constant(m: &DMatrix<f64>) -> Self {
        let mut entries = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                entries.push(TimeFn::Constant(m[(i, j)]));
            }
        }
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            entries,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(&DMatrix::zeros(rows, cols))
    }

    pub fn scalar(v: f64) -> Self {
        Self::constant(&DMatrix::from_element(1, 1, v))
    }

    pub fn from_fns(rows: usize, cols: usize, entries: Vec<TimeFn>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.entries[i * self.cols + j].eval(t))
    }
}

/// Coefficients of one regime. `c` and `d` hold one matrix per Brownian
/// component: the diffusion is Σ_j (C_j x + D_j v) dB_j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqRegime {
    pub a: TimeMatrix,
    pub b: TimeMatrix,
    pub c: Vec<TimeMatrix>,
    pub d: Vec<TimeMatrix>,
    pub r: TimeMatrix,
    pub n: TimeMatrix,
    pub q_term: TimeMatrix,
}

impl LqRegime {
    /// Scalar regime (n = n_u = d = 1) with constant coefficients.
    #[allow(clippy::too_many_arguments)]
    pub fn scalar(a: f64, b: f64, c: f64, d: f64, r: f64, n: f64, q_term: f64) -> Self {
        Self {
            a: TimeMatrix::scalar(a),
            b: TimeMatrix::scalar(b),
            c: vec![TimeMatrix::scalar(c)],
            d: vec![TimeMatrix::scalar(d)],
            r: TimeMatrix::scalar(r),
            n: TimeMatrix::scalar(n),
            q_term: TimeMatrix::scalar(q_term),
        }
    }
}

/// Regime coefficients evaluated at one time.
#[derive(Debug, Clone)]
pub(crate) struct Coefficients {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: Vec<DMatrix<f64>>,
    pub d: Vec<DMatrix<f64>>,
    pub r: DMatrix<f64>,
    pub n: DMatrix<f64>,
}

impl LqRegime {
    pub(crate) fn at(&self, t: f64) -> Coefficients {
        Coefficients {
            a: self.a.eval(t),
            b: self.b.eval(t),
            c: self.c.iter().map(|m| m.eval(t)).collect(),
            d: self.d.iter().map(|m| m.eval(t)).collect(),
            r: self.r.eval(t),
            n: self.n.eval(t),
        }
    }
}

/// Markov-jump linear-quadratic problem
///
/// ```text
/// minimize  J(v) = ½ E[ ∫_0^T (x'R(t,α)x + v'N(t,α)v) dt + x_T' Q(α_T) x_T ]
/// subject to dx = (A x + B v) dt + Σ_j (C_j x + D_j v) dB_j,  x_0 = a.
/// ```
#[derive(Debug, Clone)]
pub struct LqProblem {
    pub regimes: Vec<LqRegime>,
    pub generator: GeneratorMatrix,
    pub horizon: f64,
    pub x0: Vec<f64>,
    pub initial_regime: usize,
}

/// Shape data recorded by validation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqShape {
    pub n_x: usize,
    pub n_u: usize,
    pub brownian_dim: usize,
    /// Smallest eigenvalue of N over regimes and a time sweep.
    pub delta: f64,
}

const CHECK_POINTS: usize = 101;
const SYM_TOL: f64 = 1e-10;

fn min_sym_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    (m - m.transpose()).amax() <= SYM_TOL * m.amax().max(1.0)
}

impl LqProblem {
    /// Check shapes, symmetry, R, Q ⪰ 0 and N ≻ 0 on a time sweep.
    pub fn validate(&self) -> Result<LqShape> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        if self.regimes.is_empty() {
            return bad("at least one regime is required".into());
        }
        if self.generator.dim() != self.regimes.len() {
            return bad(format!(
                "generator has {} states for {} regimes",
                self.generator.dim(),
                self.regimes.len()
            ));
        }
        if self.initial_regime >= self.regimes.len() {
            return bad(format!("initial regime {} out of range", self.initial_regime));
        }
        if !(self.horizon > 0.0) {
            return bad("horizon must be positive".into());
        }
        let n_x = self.x0.len();
        let (_, n_u) = self.regimes[0].b.shape();
        let dim = self.regimes[0].c.len();
        if n_x == 0 || n_u == 0 || dim == 0 {
            return bad("state, control and noise dimensions must be positive".into());
        }
        let mut delta = f64::INFINITY;
        for (i, reg) in self.regimes.iter().enumerate() {
            let shapes = [
                ("A", reg.a.shape(), (n_x, n_x)),
                ("B", reg.b.shape(), (n_x, n_u)),
                ("R", reg.r.shape(), (n_x, n_x)),
                ("N", reg.n.shape(), (n_u, n_u)),
                ("Q", reg.q_term.shape(), (n_x, n_x)),
            ];
            for (name, got, want) in shapes {
                if got != want {
                    return bad(format!("regime {i}: {name} is {got:?}, expected {want:?}"));
                }
            }
            if reg.c.len() != dim || reg.d.len() != dim {
                return bad(format!("regime {i}: need {dim} C and D matrices"));
            }
            if reg.c.iter().any(|m| m.shape() != (n_x, n_x)) || reg.d.iter().any(|m| m.shape() != (n_x, n_u)) {
                return bad(format!("regime {i}: C_j must be {n_x}x{n_x} and D_j {n_x}x{n_u}"));
            }
            let q = reg.q_term.eval(self.horizon);
            if !is_symmetric(&q) || min_sym_eig(&q) < -SYM_TOL {
                return bad(format!("regime {i}: terminal weight is not symmetric PSD"));
            }
            for s in 0..CHECK_POINTS {
                let t = self.horizon * s as f64 / (CHECK_POINTS - 1) as f64;
                let co = reg.at(t);
                if !is_symmetric(&co.r) || min_sym_eig(&co.r) < -SYM_TOL {
                    return bad(format!("regime {i}: R(t) is not symmetric PSD at t = {t}"));
                }
                if !is_symmetric(&co.n) {
                    return bad(format!("regime {i}: N(t) is not symmetric at t = {t}"));
                }
                let e = min_sym_eig(&co.n);
                if !(e > 0.0) {
                    return bad(format!("regime {i}: N(t) is not positive definite at t = {t}"));
                }
                delta = delta.min(e);
                let all = [&co.a, &co.b, &co.r, &co.n];
                if all.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
                    return bad(format!("regime {i}: non-finite coefficient at t = {t}"));
                }
            }
        }
        Ok(LqShape {
            n_x,
            n_u,
            brownian_dim: dim,
            delta,
        })
    }
}
