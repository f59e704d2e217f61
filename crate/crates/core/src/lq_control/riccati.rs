//! Coupled Riccati system of the regime-switching LQ problem.
//!
//! The ansatz y_t = P(t, α_t) x_t, z_t^j = P(t, α_t)(C_j x_t + D_j u_t) in
//! the optimality system of the control problem gives, for each regime i,
//!
//! ```text
//! −Ṗ_i = A_i'P_i + P_i A_i + Σ_j C_j'P_i C_j + R_i + Σ_l q_il P_l
//!        − S_i' (N_i + Σ_j D_j'P_i D_j)^{-1} S_i,
//! S_i  = B_i'P_i + Σ_j D_j'P_i C_j,            P_i(T) = Q_i,
//! ```
//!
//! and the first-order condition u = −N^{-1}(B'y + Σ_j D_j'z^j), which is
//! implicit in u through z, resolves to the feedback
//! u = −(N_i + Σ_j D_j'P_i D_j)^{-1} S_i x.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lq_control::problem::{Coefficients, LqProblem, LqShape};

pub const RICCATI_STEPS: usize = 2000;
const BLOWUP_NORM: f64 = 1e10;

/// Per-regime Riccati solutions on a fine grid and the induced feedback law.
#[derive(Debug, Clone)]
pub struct FeedbackSolution {
    problem: LqProblem,
    shape: LqShape,
    times: Vec<f64>,
    /// p[k][i] = P_i(times[k]).
    p: Vec<Vec<DMatrix<f64>>>,
    scale: f64,
}

fn s_matrix(co: &Coefficients, p: &DMatrix<f64>) -> DMatrix<f64> {
    let mut s = co.b.transpose() * p;
    for (c, d) in co.c.iter().zip(&co.d) {
        s += d.transpose() * p * c;
    }
    s
}

fn n_hat(co: &Coefficients, p: &DMatrix<f64>) -> DMatrix<f64> {
    let mut n = co.n.clone();
    for d in &co.d {
        n += d.transpose() * p * d;
    }
    n
}

/// Feedback gain K with u = K x.
pub(crate) fn gain(co: &Coefficients, p: &DMatrix<f64>) -> DMatrix<f64> {
    let s = s_matrix(co, p);
    let nh = n_hat(co, p);
    let sol = match nh.clone().cholesky() {
        Some(ch) => ch.solve(&s),
        None => nh.lu().solve(&s).unwrap_or_else(|| DMatrix::zeros(s.nrows(), s.ncols())),
    };
    -sol
}

fn rhs(problem: &LqProblem, coeffs: &[Coefficients], ps: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let q = problem.generator.rates();
    coeffs
        .iter()
        .zip(ps)
        .enumerate()
        .map(|(i, (co, p))| {
            let mut out = co.a.transpose() * p + p * &co.a + &co.r;
            for c in &co.c {
                out += c.transpose() * p * c;
            }
            for (l, pl) in ps.iter().enumerate() {
                if q[(i, l)] != 0.0 {
                    out += pl * q[(i, l)];
                }
            }
            let s = s_matrix(co, p);
            let k = gain(co, p);
            // S'(N̂)^{-1}S = −S'K
            out += s.transpose() * k;
            out
        })
        .collect()
}

fn axpy(base: &[DMatrix<f64>], h: f64, k: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    base.iter().zip(k).map(|(b, d)| b + d * h).collect()
}

/// Integrate the coupled Riccati system backward from P_i(T) = Q_i with
/// classical RK4 on [`RICCATI_STEPS`] uniform steps.
pub fn solve_optimal(problem: &LqProblem) -> Result<FeedbackSolution> {
    solve_optimal_with_steps(problem, RICCATI_STEPS)
}

pub fn solve_optimal_with_steps(problem: &LqProblem, steps: usize) -> Result<FeedbackSolution> {
    let shape = problem.validate()?;
    if steps == 0 {
        return Err(Error::InvalidArgument("Riccati integration needs at least one step".into()));
    }
    let big_t = problem.horizon;
    let h = big_t / steps as f64;
    let coeffs_at = |t: f64| -> Vec<Coefficients> { problem.regimes.iter().map(|r| r.at(t)).collect() };
    let mut current: Vec<DMatrix<f64>> = problem.regimes.iter().map(|r| r.q_term.eval(big_t)).collect();
    let mut backward = vec![current.clone()];
    for s in 0..steps {
        let t = big_t - s as f64 * h;
        let (c0, c_half, c1) = (coeffs_at(t), coeffs_at(t - 0.5 * h), coeffs_at(t - h));
        // dP/dτ = rhs with τ = T − t
        let k1 = rhs(problem, &c0, &current);
        let k2 = rhs(problem, &c_half, &axpy(&current, 0.5 * h, &k1));
        let k3 = rhs(problem, &c_half, &axpy(&current, 0.5 * h, &k2));
        let k4 = rhs(problem, &c1, &axpy(&current, h, &k3));
        for (i, p) in current.iter_mut().enumerate() {
            *p += (&k1[i] + &k2[i] * 2.0 + &k3[i] * 2.0 + &k4[i]) * (h / 6.0);
            let sym = (&*p + p.transpose()) * 0.5;
            *p = sym;
            let norm = p.norm();
            if !(norm <= BLOWUP_NORM) {
                return Err(Error::RiccatiBlowup { t: t - h, norm });
            }
        }
        backward.push(current.clone());
    }
    backward.reverse();
    let times = (0..=steps)
        .map(|k| if k == steps { big_t } else { k as f64 * h })
        .collect();
    Ok(FeedbackSolution {
        problem: problem.clone(),
        shape,
        times,
        p: backward,
        scale: 1.0,
    })
}

impl FeedbackSolution {
    pub fn problem(&self) -> &LqProblem {
        &self.problem
    }

    pub fn shape(&self) -> LqShape {
        self.shape
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Factor applied to every P (1 for the computed solution).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Copy with every P multiplied by `factor` (a deliberately wrong
    /// feedback, for negative controls).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.scale *= factor;
        out
    }

    /// P_i(t), linearly interpolated between grid nodes.
    pub fn p_at(&self, t: f64, regime: usize) -> DMatrix<f64> {
        let n = self.times.len() - 1;
        let h = self.problem.horizon / n as f64;
        let pos = (t / h).clamp(0.0, n as f64);
        let k = (pos.floor() as usize).min(n - 1);
        let w = pos - k as f64;
        let p = &self.p[k][regime] * (1.0 - w) + &self.p[k + 1][regime] * w;
        p * self.scale
    }

    /// Gain K_i(t) of the feedback u = K x.
    pub fn gain_at(&self, t: f64, regime: usize) -> DMatrix<f64> {
        let co = self.problem.regimes[regime].at(t);
        gain(&co, &self.p_at(t, regime))
    }

    /// Smallest eigenvalue of any P_i on the grid and largest asymmetry.
    pub fn psd_check(&self) -> (f64, f64) {
        let mut min_eig = f64::INFINITY;
        let mut asym: f64 = 0.0;
        for row in &self.p {
            for p in row {
                let p = p * self.scale;
                asym = asym.max((&p - p.transpose()).amax());
                min_eig = min_eig.min(p.symmetric_eigen().eigenvalues.min());
            }
        }
        (min_eig, asym)
    }

    /// Optimal value ½ x0' P(0, α_0) x0.
    pub fn value(&self) -> f64 {
        let x = nalgebra::DVector::from_column_slice(&self.problem.x0);
        0.5 * (x.transpose() * self.p_at(0.0, self.problem.initial_regime) * &x)[(0, 0)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lq_control::problem::LqRegime;
    use crate::markov_chain::GeneratorMatrix;

    fn scalar(r: f64) -> LqProblem {
        LqProblem {
            regimes: vec![LqRegime::scalar(0.0, 1.0, 0.0, 0.0, r, 1.0, 0.0)],
            generator: GeneratorMatrix::zeros(1),
            horizon: 1.0,
            x0: vec![1.0],
            initial_regime: 0,
        }
    }

    #[test]
    fn tanh_closed_form() {
        let fb = solve_optimal(&scalar(1.0)).unwrap();
        for &t in &[0.0, 0.25, 0.5, 0.9] {
            assert!((fb.p_at(t, 0)[(0, 0)] - (1.0 - t).tanh()).abs() < 1e-9);
        }
        assert!((fb.gain_at(0.0, 0)[(0, 0)] + 1.0_f64.tanh()).abs() < 1e-9);
    }

    #[test]
    fn zero_weights_give_zero_feedback() {
        let fb = solve_optimal(&scalar(0.0)).unwrap();
        assert_eq!(fb.p_at(0.3, 0)[(0, 0)], 0.0);
        assert_eq!(fb.gain_at(0.3, 0)[(0, 0)], 0.0);
    }

    #[test]
    fn riccati_blowup_detected() {
        // dx = x dt + x dB with no effective control and a huge horizon
        let mut p = scalar(1.0);
        p.regimes = vec![LqRegime::scalar(5.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0)];
        p.horizon = 10.0;
        assert!(matches!(solve_optimal(&p), Err(Error::RiccatiBlowup { .. })));
    }
}
