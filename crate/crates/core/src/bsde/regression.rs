//! Least-squares conditional expectations on a polynomial basis of the
//! current forward state.
//!
//! Basis per coordinate: x, x², x³; plus pairwise products x_j x_l. The
//! intercept is handled by exact centering, columns are standardized, and a
//! ridge of 1e-10·trace(G)/q stabilizes the Gram matrix G.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::stats::exact_mean;

/// Raw basis functions (no constant) evaluated at x.
pub(crate) fn basis(x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    for &v in x {
        out.push(v);
        out.push(v * v);
        out.push(v * v * v);
    }
    for j in 0..x.len() {
        for l in j + 1..x.len() {
            out.push(x[j] * x[l]);
        }
    }
}

pub(crate) fn basis_len(dim: usize) -> usize {
    3 * dim + dim * dim.saturating_sub(1) / 2
}

pub(crate) struct Regressor {
    n: usize,
    q: usize,
    node: usize,
    features: Vec<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    /// Set when the design cannot be solved; only reported once a
    /// non-constant target actually needs the fit.
    singular: bool,
}

impl Regressor {
    /// `states` holds `dim` coordinates per path for the n paths at one node.
    pub(crate) fn new(states: &[f64], dim: usize, node: usize) -> Self {
        let n = states.len() / dim;
        let full = basis_len(dim);
        let mut raw = Vec::with_capacity(n * full);
        let mut buf = Vec::with_capacity(full);
        for p in 0..n {
            basis(&states[p * dim..(p + 1) * dim], &mut buf);
            raw.extend_from_slice(&buf);
        }
        // keep columns that actually vary across paths
        let mut keep = Vec::new();
        let mut moments = Vec::new();
        for c in 0..full {
            let col: Vec<f64> = (0..n).map(|p| raw[p * full + c]).collect();
            let mean = exact_mean(&col);
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            if sd > 1e-10 * mean.abs().max(1.0) {
                keep.push(c);
                moments.push((mean, sd));
            }
        }
        let q = keep.len();
        if q == 0 {
            return Self {
                n,
                q,
                node,
                features: Vec::new(),
                chol: None,
                singular: false,
            };
        }
        if n <= q + 1 {
            return Self {
                n,
                q,
                node,
                features: Vec::new(),
                chol: None,
                singular: true,
            };
        }
        let mut features = Vec::with_capacity(n * q);
        for p in 0..n {
            for (&c, &(mean, sd)) in keep.iter().zip(&moments) {
                features.push((raw[p * full + c] - mean) / sd);
            }
        }
        let mut gram = DMatrix::<f64>::zeros(q, q);
        for p in 0..n {
            let row = &features[p * q..(p + 1) * q];
            for a in 0..q {
                for b in a..q {
                    gram[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..q {
            for b in a..q {
                gram[(a, b)] /= n as f64;
                gram[(b, a)] = gram[(a, b)];
            }
        }
        let ridge = 1e-10 * gram.trace() / q as f64;
        for a in 0..q {
            gram[(a, a)] += ridge;
        }
        let chol = Cholesky::new(gram);
        Self {
            n,
            q,
            node,
            singular: chol.is_none(),
            features,
            chol,
        }
    }

    pub(crate) fn n_columns(&self) -> usize {
        self.q + 1
    }

    /// Fitted conditional expectation of `target` for every path. A
    /// constant target is returned exactly, even on a singular design.
    pub(crate) fn project(&self, target: &[f64], out: &mut [f64]) -> Result<()> {
        debug_assert_eq!(target.len(), self.n);
        let mean = exact_mean(target);
        if target.iter().all(|&v| v == target[0]) {
            out.fill(target[0]);
            return Ok(());
        }
        if self.singular {
            return Err(Error::RegressionSingular {
                node: self.node,
                paths: self.n,
                columns: self.q + 1,
            });
        }
        let Some(chol) = &self.chol else {
            out.fill(mean);
            return Ok(());
        };
        let q = self.q;
        let mut rhs = DVector::<f64>::zeros(q);
        let mut any = false;
        for p in 0..self.n {
            let r = target[p] - mean;
            if r != 0.0 {
                any = true;
                let row = &self.features[p * q..(p + 1) * q];
                for a in 0..q {
                    rhs[a] += row[a] * r;
                }
            }
        }
        if !any {
            out.fill(mean);
            return Ok(());
        }
        rhs /= self.n as f64;
        let coef = chol.solve(&rhs);
        for (p, o) in out.iter_mut().enumerate() {
            let row = &self.features[p * q..(p + 1) * q];
            *o = mean + row.iter().zip(coef.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubic_exactly() {
        let xs: Vec<f64> = (0..50).map(|i| -1.0 + i as f64 * 0.04).collect();
        let target: Vec<f64> = xs.iter().map(|x| 1.0 + 2.0 * x - x * x * x).collect();
        let reg = Regressor::new(&xs, 1, 0);
        let mut out = vec![0.0; xs.len()];
        reg.project(&target, &mut out).unwrap();
        for (a, b) in out.iter().zip(&target) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_state_reduces_to_mean() {
        let xs = vec![0.0; 10];
        let reg = Regressor::new(&xs, 1, 0);
        assert_eq!(reg.n_columns(), 1);
        let mut out = vec![0.0; 10];
        reg.project(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0], &mut out).unwrap();
        assert!(out.iter().all(|&v| (v - 5.5).abs() < 1e-15));
    }

    #[test]
    fn constant_target_is_exact() {
        let xs: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let reg = Regressor::new(&xs, 1, 0);
        let mut out = vec![0.0; 20];
        reg.project(&[0.1; 20], &mut out).unwrap();
        assert!(out.iter().all(|&v| v == 0.1));
    }

    #[test]
    fn too_few_paths() {
        let xs = [0.1, 0.2, 0.3];
        let reg = Regressor::new(&xs, 1, 4);
        let mut out = [0.0; 3];
        assert!(reg.project(&[1.0; 3], &mut out).is_ok());
        assert!(matches!(
            reg.project(&[1.0, 2.0, 3.0], &mut out),
            Err(Error::RegressionSingular { node: 4, .. })
        ));
    }

    #[test]
    fn cross_terms_counted() {
        assert_eq!(basis_len(1), 3);
        assert_eq!(basis_len(2), 7);
        let mut b = Vec::new();
        basis(&[2.0, 3.0], &mut b);
        assert_eq!(b, vec![2.0, 4.0, 8.0, 3.0, 9.0, 27.0, 6.0]);
    }
}
