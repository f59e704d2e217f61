use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for generator validation.
pub const GENERATOR_TOL: f64 = 1e-9;

/// Singular values below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-10;

/// Transition-rate matrix of a finite continuous-time Markov chain.
///
/// Off-diagonal entries are non-negative jump rates and every row sums to
/// zero. The diagonal is always recomputed from the off-diagonal entries.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMatrix {
    rates: DMatrix<f64>,
    labels: Option<Vec<String>>,
}

/// Validate a candidate generator.
///
/// Off-diagonal entries in `[-tol, 0)` are clamped to zero; rows whose sum
/// is within `tol` of zero get their diagonal recomputed so the row sums to
/// exactly zero.
pub fn validate_generator(matrix: DMatrix<f64>, tol: f64) -> Result<GeneratorMatrix> {
    let (rows, cols) = matrix.shape();
    if rows != cols || rows == 0 {
        return Err(Error::NotSquare { rows, cols });
    }
    let mut rates = matrix;
    for i in 0..rows {
        let sum: f64 = rates.row(i).iter().sum();
        if !sum.is_finite() || sum.abs() > tol {
            return Err(Error::RowSumViolation { row: i, sum });
        }
        let mut off = 0.0;
        for j in 0..cols {
            if i == j {
                continue;
            }
            let q = rates[(i, j)];
            if q < -tol || !q.is_finite() {
                return Err(Error::NegativeRate { row: i, col: j, value: q });
            }
            if q < 0.0 {
                rates[(i, j)] = 0.0;
            }
            off += rates[(i, j)];
        }
        rates[(i, i)] = -off;
    }
    Ok(GeneratorMatrix { rates, labels: None })
}

impl GeneratorMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        validate_generator(matrix, GENERATOR_TOL)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::NotSquare { rows: m, cols: r.len() });
        }
        Self::new(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            rates: DMatrix::zeros(m, m),
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} states",
                labels.len(),
                self.dim()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.rates.nrows()
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rates[(i, j)]
    }

    /// Total rate of leaving state `i`, −q_ii.
    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.rates[(i, i)]
    }

    pub fn max_exit_rate(&self) -> f64 {
        (0..self.dim()).map(|i| self.exit_rate(i)).fold(0.0, f64::max)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| self.rates.row(i).iter().copied().collect())
            .collect()
    }

    /// Sub-generator restricted to `states` (diagonal recomputed).
    pub fn restrict(&self, states: &[usize]) -> Result<Self> {
        let n = states.len();
        let mut sub = DMatrix::from_fn(n, n, |a, b| self.rates[(states[a], states[b])]);
        for a in 0..n {
            sub[(a, a)] = 0.0;
            let s: f64 = sub.row(a).iter().sum();
            sub[(a, a)] = -s;
        }
        validate_generator(sub, GENERATOR_TOL)
    }

    /// Numerical rank of Qᵀ.
    pub fn rank(&self) -> usize {
        let sv = self.rates.transpose().singular_values();
        let max = sv.iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > RANK_TOL * max).count()
    }

    /// Weakly irreducible generators have a one-dimensional left nullspace.
    pub fn is_weakly_irreducible(&self) -> bool {
        self.rank() + 1 == self.dim()
    }

    /// The quasi-stationary distribution ν with νQ = 0, Σν = 1.
    pub fn quasi_stationary(&self) -> Result<QuasiStationaryDistribution> {
        quasi_stationary(self)
    }

    /// exp(Q t).
    pub fn transition_matrix(&self, t: f64) -> DMatrix<f64> {
        transition_matrix(self, t)
    }
}

/// Quasi-stationary distribution of a weakly irreducible generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiStationaryDistribution {
    nu: Vec<f64>,
}

impl QuasiStationaryDistribution {
    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    /// Point mass on a single state.
    pub fn point_mass() -> Self {
        Self { nu: vec![1.0] }
    }

    /// Accepts a user-supplied vector if it is a probability vector.
    pub fn from_vec(nu: Vec<f64>) -> Result<Self> {
        let sum: f64 = nu.iter().sum();
        if nu.iter().any(|&v| v < 0.0 || !v.is_finite()) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("{nu:?} is not a probability vector")));
        }
        Ok(Self { nu })
    }

    /// max_j |(νQ)_j|
    pub fn residual(&self, q: &GeneratorMatrix) -> f64 {
        let row = DVector::from_column_slice(&self.nu).transpose() * q.rates();
        row.iter().fold(0.0_f64, |a, b| a.max(b.abs()))
    }
}

/// Solve the stacked least-squares system [Qᵀ; 1ᵀ] ν = [0; 1].
pub fn quasi_stationary(q: &GeneratorMatrix) -> Result<QuasiStationaryDistribution> {
    let m = q.dim();
    if m == 1 {
        return Ok(QuasiStationaryDistribution::point_mass());
    }
    let rank = q.rank();
    if rank + 1 != m {
        return Err(Error::NotWeaklyIrreducible(format!(
            "rank of Q' is {rank}, expected {}",
            m - 1
        )));
    }
    let mut a = DMatrix::zeros(m + 1, m);
    a.view_mut((0, 0), (m, m)).copy_from(&q.rates().transpose());
    a.row_mut(m).fill(1.0);
    let mut b = DVector::zeros(m + 1);
    b[m] = 1.0;
    let svd = a.svd(true, true);
    let nu = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::NotWeaklyIrreducible(e.to_string()))?;
    let mut nu: Vec<f64> = nu.iter().copied().collect();
    if nu.iter().any(|&v| v < -1e-10) {
        return Err(Error::NotWeaklyIrreducible(format!(
            "stationary solution has negative entries: {nu:?}"
        )));
    }
    for v in nu.iter_mut() {
        *v = v.max(0.0);
    }
    let total: f64 = nu.iter().sum();
    for v in nu.iter_mut() {
        *v /= total;
    }
    let dist = QuasiStationaryDistribution { nu };
    let scale = q.max_exit_rate().max(1.0);
    if dist.residual(q) > 1e-8 * scale {
        return Err(Error::NotWeaklyIrreducible(format!(
            "stationarity residual {} too large",
            dist.residual(q)
        )));
    }
    Ok(dist)
}

/// exp(Q t) by scaling and squaring of a truncated Taylor series.
pub fn transition_matrix(q: &GeneratorMatrix, t: f64) -> DMatrix<f64> {
    expm(&(q.rates() * t))
}

pub(crate) fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = (0..n)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &scaled / k as f64;
        result += &term;
        if term.amax() < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_q() -> GeneratorMatrix {
        GeneratorMatrix::from_rows(&[
            vec![-22.0, 20.0, 2.0],
            vec![41.0, -42.0, 1.0],
            vec![1.0, 2.0, -3.0],
        ])
        .unwrap()
    }

    #[test]
    fn validates_three_state_generator() {
        let q = example_q();
        assert_eq!(q.dim(), 3);
        assert_eq!(q.rate(1, 1), -42.0);
    }

    #[test]
    fn zero_matrix_is_absorbing_generator() {
        let q = GeneratorMatrix::new(DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(q.max_exit_rate(), 0.0);
    }

    #[test]
    fn rejects_bad_row_sum() {
        let err = GeneratorMatrix::from_rows(&[vec![-1.0, 2.0], vec![1.0, -1.0]]).unwrap_err();
        assert!(matches!(err, Error::RowSumViolation { row: 0, .. }));
    }

    #[test]
    fn rejects_negative_rate() {
        let err = GeneratorMatrix::from_rows(&[vec![1.0, -1.0], vec![1.0, -1.0]]).unwrap_err();
        assert!(matches!(err, Error::NegativeRate { row: 0, col: 1, .. }));
    }

    #[test]
    fn rejects_non_square() {
        let err = validate_generator(DMatrix::zeros(2, 3), 1e-9).unwrap_err();
        assert!(matches!(err, Error::NotSquare { .. }));
    }

    #[test]
    fn diagonal_recomputed_within_tolerance() {
        let q = GeneratorMatrix::from_rows(&[vec![-1.0 - 1e-11, 1.0], vec![2.0, -2.0]]).unwrap();
        assert_eq!(q.rate(0, 0), -1.0);
    }

    #[test]
    fn qsd_two_state_block() {
        let q = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0], vec![2.0, -2.0]]).unwrap();
        let nu = q.quasi_stationary().unwrap();
        assert!((nu.nu()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((nu.nu()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn qsd_single_state_and_symmetric() {
        let one = GeneratorMatrix::zeros(1);
        assert_eq!(one.quasi_stationary().unwrap().nu(), &[1.0]);
        let a = 3.7;
        let q = GeneratorMatrix::from_rows(&[vec![-a, a], vec![a, -a]]).unwrap();
        let nu = q.quasi_stationary().unwrap();
        assert!((nu.nu()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn qsd_rejects_reducible() {
        let q = GeneratorMatrix::zeros(2);
        assert!(matches!(q.quasi_stationary(), Err(Error::NotWeaklyIrreducible(_))));
        let q = GeneratorMatrix::from_rows(&[
            vec![-1.0, 1.0, 0.0, 0.0],
            vec![1.0, -1.0, 0.0, 0.0],
            vec![0.0, 0.0, -2.0, 2.0],
            vec![0.0, 0.0, 2.0, -2.0],
        ])
        .unwrap();
        assert!(!q.is_weakly_irreducible());
    }

    #[test]
    fn transition_matrix_identity_cases() {
        let q = example_q();
        let p0 = q.transition_matrix(0.0);
        assert!((p0 - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);
        let z = GeneratorMatrix::zeros(3).transition_matrix(5.0);
        assert!((z - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);
    }

    #[test]
    fn transition_matrix_two_state_closed_form() {
        let (a, b) = (1.3, 0.4);
        let q = GeneratorMatrix::from_rows(&[vec![-a, a], vec![b, -b]]).unwrap();
        for &t in &[0.01, 0.5, 2.0, 30.0] {
            let p = q.transition_matrix(t);
            let e = (-(a + b) * t).exp();
            let p00 = b / (a + b) + a / (a + b) * e;
            let p11 = a / (a + b) + b / (a + b) * e;
            assert!((p[(0, 0)] - p00).abs() < 1e-12);
            assert!((p[(0, 1)] - (1.0 - p00)).abs() < 1e-12);
            assert!((p[(1, 1)] - p11).abs() < 1e-12);
        }
    }

    #[test]
    fn transition_matrix_rows_stochastic() {
        let p = example_q().transition_matrix(3.0);
        for i in 0..3 {
            assert!((p.row(i).sum() - 1.0).abs() < 1e-10);
        }
    }
}
