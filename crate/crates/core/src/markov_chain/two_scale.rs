use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::generator::{validate_generator, GeneratorMatrix, QuasiStationaryDistribution, GENERATOR_TOL};
use crate::error::{Error, Result};

/// Disjoint, non-empty blocks M_1, ..., M_l covering the states 0..m.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<usize>>", into = "Vec<Vec<usize>>")]
pub struct StatePartition {
    blocks: Vec<Vec<usize>>,
    block_of: Vec<usize>,
}

impl StatePartition {
    pub fn new(blocks: Vec<Vec<usize>>) -> Result<Self> {
        let m: usize = blocks.iter().map(Vec::len).sum();
        let mut block_of = vec![usize::MAX; m];
        for (k, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidPartition(format!("block {k} is empty")));
            }
            for &s in block {
                if s >= m {
                    return Err(Error::InvalidPartition(format!(
                        "state {s} out of range for {m} states"
                    )));
                }
                if block_of[s] != usize::MAX {
                    return Err(Error::InvalidPartition(format!("state {s} appears twice")));
                }
                block_of[s] = k;
            }
        }
        Ok(Self { blocks, block_of })
    }

    /// Every state in its own block.
    pub fn singletons(m: usize) -> Self {
        Self::new((0..m).map(|s| vec![s]).collect()).expect("singleton partition is valid")
    }

    /// All states in one block.
    pub fn single_block(m: usize) -> Self {
        Self::new(vec![(0..m).collect()]).expect("single block is valid")
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &[usize] {
        &self.blocks[k]
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn n_states(&self) -> usize {
        self.block_of.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn block_of(&self, state: usize) -> Result<usize> {
        self.block_of.get(state).copied().ok_or(Error::UnknownState(state))
    }
}

impl TryFrom<Vec<Vec<usize>>> for StatePartition {
    type Error = Error;
    fn try_from(blocks: Vec<Vec<usize>>) -> Result<Self> {
        Self::new(blocks)
    }
}

impl From<StatePartition> for Vec<Vec<usize>> {
    fn from(p: StatePartition) -> Self {
        p.blocks
    }
}

/// Singularly perturbed generator Q^ε = Q̃/ε + Q̂ with block-diagonal fast
/// part Q̃ (one weakly irreducible block per partition block).
#[derive(Debug, Clone, PartialEq)]
pub struct TwoScaleGenerator {
    fast: GeneratorMatrix,
    slow: GeneratorMatrix,
    epsilon: f64,
    partition: StatePartition,
    nus: Vec<QuasiStationaryDistribution>,
}

impl TwoScaleGenerator {
    pub fn new(
        fast: GeneratorMatrix,
        slow: GeneratorMatrix,
        epsilon: f64,
        partition: StatePartition,
    ) -> Result<Self> {
        let issues = structural_issues(&fast, &slow, epsilon, &partition);
        if let Some(first) = issues.into_iter().next() {
            return Err(Error::InvalidTwoScale(first));
        }
        let nus = partition
            .blocks()
            .iter()
            .map(|b| fast.restrict(b).and_then(|g| g.quasi_stationary()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            fast,
            slow,
            epsilon,
            partition,
            nus,
        })
    }

    /// Same structure, different ε.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidTwoScale(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self {
            epsilon,
            ..self.clone()
        })
    }

    pub fn fast(&self) -> &GeneratorMatrix {
        &self.fast
    }

    pub fn slow(&self) -> &GeneratorMatrix {
        &self.slow
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn partition(&self) -> &StatePartition {
        &self.partition
    }

    pub fn dim(&self) -> usize {
        self.fast.dim()
    }

    /// Quasi-stationary distribution of each fast block.
    pub fn quasi_stationary(&self) -> &[QuasiStationaryDistribution] {
        &self.nus
    }

    pub fn block_generator(&self, k: usize) -> Result<GeneratorMatrix> {
        self.fast.restrict(self.partition.block(k))
    }

    /// Q^ε = Q̃/ε + Q̂.
    pub fn compose(&self) -> GeneratorMatrix {
        compose(self)
    }

    /// Generator of the limit aggregated chain.
    pub fn aggregate(&self) -> GeneratorMatrix {
        aggregate_generator(&self.slow, &self.partition, &self.nus)
            .expect("aggregation of a validated two-scale generator")
    }

    /// Re-check every structural invariant; empty when all hold.
    pub fn invariant_issues(&self) -> Vec<String> {
        let mut issues = structural_issues(&self.fast, &self.slow, self.epsilon, &self.partition);
        if let Err(e) = validate_generator(self.compose().rates().clone(), GENERATOR_TOL) {
            issues.push(format!("composed generator invalid: {e}"));
        }
        issues
    }
}

fn structural_issues(
    fast: &GeneratorMatrix,
    slow: &GeneratorMatrix,
    epsilon: f64,
    partition: &StatePartition,
) -> Vec<String> {
    let mut issues = Vec::new();
    let m = fast.dim();
    if slow.dim() != m || partition.n_states() != m {
        issues.push(format!(
            "dimensions differ: fast {m}, slow {}, partition {}",
            slow.dim(),
            partition.n_states()
        ));
        return issues;
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        issues.push(format!("epsilon must be positive, got {epsilon}"));
    }
    for i in 0..m {
        for j in 0..m {
            let (bi, bj) = (partition.block_of(i).unwrap(), partition.block_of(j).unwrap());
            if bi != bj && fast.rate(i, j).abs() > 1e-12 {
                issues.push(format!(
                    "fast rate q[{i}][{j}] = {} crosses blocks {bi} and {bj}",
                    fast.rate(i, j)
                ));
            }
        }
    }
    for (k, block) in partition.blocks().iter().enumerate() {
        if block.len() < 2 {
            continue;
        }
        match fast.restrict(block) {
            Ok(g) => {
                if let Some(a) = (0..block.len()).find(|&a| g.exit_rate(a) == 0.0) {
                    issues.push(format!("state {} is absorbing inside fast block {k}", block[a]));
                } else if !g.is_weakly_irreducible() {
                    issues.push(format!("fast block {k} is not weakly irreducible"));
                }
            }
            Err(e) => issues.push(format!("fast block {k}: {e}")),
        }
    }
    issues
}

pub fn compose(ts: &TwoScaleGenerator) -> GeneratorMatrix {
    let eps = ts.epsilon;
    let rates = ts.fast.rates().map(|q| q / eps) + ts.slow.rates();
    validate_generator(rates, GENERATOR_TOL * (1.0 / eps).max(1.0))
        .expect("sum of generators is a generator")
}

/// Outcome of checking a user-supplied split Q ≈ Q̃/ε + Q̂.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub pass: bool,
    pub max_residual: f64,
    pub tol: f64,
    pub issues: Vec<String>,
}

pub fn verify_decomposition(
    q: &GeneratorMatrix,
    ts: &TwoScaleGenerator,
    tol: f64,
) -> Result<DecompositionReport> {
    if q.dim() != ts.dim() {
        return Err(Error::DimensionMismatch(format!(
            "generator has {} states, decomposition has {}",
            q.dim(),
            ts.dim()
        )));
    }
    let composed = ts.compose();
    let max_residual = (q.rates() - composed.rates()).amax();
    let mut issues = ts.invariant_issues();
    if max_residual > tol {
        issues.push(format!("max residual {max_residual:e} exceeds {tol:e}"));
    }
    Ok(DecompositionReport {
        pass: issues.is_empty(),
        max_residual,
        tol,
        issues,
    })
}

/// Q̄ = diag(ν¹, …, ν^l) Q̂ diag(1_{m_1}, …, 1_{m_l}).
pub fn aggregate_generator(
    slow: &GeneratorMatrix,
    partition: &StatePartition,
    nus: &[QuasiStationaryDistribution],
) -> Result<GeneratorMatrix> {
    if partition.n_states() != slow.dim() {
        return Err(Error::DimensionMismatch(format!(
            "partition covers {} states, slow generator has {}",
            partition.n_states(),
            slow.dim()
        )));
    }
    if nus.len() != partition.n_blocks() {
        return Err(Error::DimensionMismatch(format!(
            "{} quasi-stationary distributions for {} blocks",
            nus.len(),
            partition.n_blocks()
        )));
    }
    for (k, (nu, block)) in nus.iter().zip(partition.blocks()).enumerate() {
        if nu.len() != block.len() {
            return Err(Error::DimensionMismatch(format!(
                "block {k} has {} states but its distribution has {}",
                block.len(),
                nu.len()
            )));
        }
    }
    let l = partition.n_blocks();
    let q = slow.rates();
    let agg = DMatrix::from_fn(l, l, |k, j| {
        partition
            .block(k)
            .iter()
            .zip(nus[k].nu())
            .map(|(&a, &w)| w * partition.block(j).iter().map(|&b| q[(a, b)]).sum::<f64>())
            .sum()
    });
    validate_generator(agg, GENERATOR_TOL * slow.max_exit_rate().max(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn three_state(eps: f64) -> TwoScaleGenerator {
        let fast = GeneratorMatrix::from_rows(&[
            vec![-1.0, 1.0, 0.0],
            vec![2.0, -2.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let slow = GeneratorMatrix::from_rows(&[
            vec![-2.0, 0.0, 2.0],
            vec![1.0, -2.0, 1.0],
            vec![1.0, 2.0, -3.0],
        ])
        .unwrap();
        let part = StatePartition::new(vec![vec![0, 1], vec![2]]).unwrap();
        TwoScaleGenerator::new(fast, slow, eps, part).unwrap()
    }

    #[test]
    fn partition_rejects_overlap_and_gaps() {
        assert!(StatePartition::new(vec![vec![0, 1], vec![1]]).is_err());
        assert!(StatePartition::new(vec![vec![0, 2], vec![]]).is_err());
        assert!(StatePartition::new(vec![vec![0, 3], vec![1]]).is_err());
        let p = StatePartition::new(vec![vec![2], vec![0, 1]]).unwrap();
        assert_eq!(p.block_of(2).unwrap(), 0);
        assert!(matches!(p.block_of(5), Err(Error::UnknownState(5))));
    }

    #[test]
    fn compose_matches_printed_generator() {
        let q = three_state(0.05).compose();
        let expect = [[-22.0, 20.0, 2.0], [41.0, -42.0, 1.0], [1.0, 2.0, -3.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((q.rate(i, j) - expect[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn compose_trivial_cases() {
        let ts = three_state(1.0);
        let sum = ts.fast().rates() + ts.slow().rates();
        assert!((ts.compose().rates() - sum).amax() < 1e-15);

        let zero_fast = TwoScaleGenerator::new(
            GeneratorMatrix::zeros(3),
            ts.slow().clone(),
            0.01,
            StatePartition::singletons(3),
        )
        .unwrap();
        assert_eq!(zero_fast.compose().rates(), ts.slow().rates());
    }

    #[test]
    fn aggregate_matches_printed_limit() {
        let ts = three_state(0.05);
        let nu = ts.quasi_stationary()[0].nu();
        assert!((nu[0] - 2.0 / 3.0).abs() < 1e-12 && (nu[1] - 1.0 / 3.0).abs() < 1e-12);
        let qbar = ts.aggregate();
        let expect = [[-5.0 / 3.0, 5.0 / 3.0], [3.0, -3.0]];
        for k in 0..2 {
            for j in 0..2 {
                assert!((qbar.rate(k, j) - expect[k][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn aggregate_singleton_and_single_block() {
        let ts = three_state(0.05);
        let single = vec![QuasiStationaryDistribution::point_mass(); 3];
        let same = aggregate_generator(ts.slow(), &StatePartition::singletons(3), &single).unwrap();
        assert_eq!(same.rates(), ts.slow().rates());

        let nu = QuasiStationaryDistribution::from_vec(vec![0.2, 0.3, 0.5]).unwrap();
        let one = aggregate_generator(ts.slow(), &StatePartition::single_block(3), &[nu]).unwrap();
        assert_eq!(one.dim(), 1);
        assert!(one.rate(0, 0).abs() < 1e-15);
    }

    #[test]
    fn aggregate_dimension_mismatch() {
        let ts = three_state(0.05);
        let err = aggregate_generator(ts.slow(), ts.partition(), &[QuasiStationaryDistribution::point_mass()]);
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn verify_decomposition_cases() {
        let ts = three_state(0.05);
        let q = ts.compose();
        let ok = verify_decomposition(&q, &ts, 1e-12).unwrap();
        assert!(ok.pass);
        assert_eq!(ok.max_residual, 0.0);

        let halved = ts.with_epsilon(0.025).unwrap();
        assert!(!verify_decomposition(&q, &halved, 1e-6).unwrap().pass);

        let mut slow = ts.slow().rates().clone();
        slow[(0, 1)] += 1e-3;
        slow[(0, 0)] -= 1e-3;
        let perturbed = TwoScaleGenerator::new(
            ts.fast().clone(),
            GeneratorMatrix::new(slow).unwrap(),
            0.05,
            ts.partition().clone(),
        )
        .unwrap();
        let rep = verify_decomposition(&q, &perturbed, 1e-6).unwrap();
        assert!(!rep.pass);
        assert!((rep.max_residual - 1e-3).abs() < 1e-9);

        let small = GeneratorMatrix::zeros(2);
        assert!(matches!(verify_decomposition(&small, &ts, 1e-6), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn rejects_cross_block_fast_rates_and_absorbing_blocks() {
        let ts = three_state(0.05);
        let bad = TwoScaleGenerator::new(
            ts.fast().clone(),
            ts.slow().clone(),
            0.05,
            StatePartition::new(vec![vec![0], vec![1, 2]]).unwrap(),
        );
        assert!(matches!(bad, Err(Error::InvalidTwoScale(_))));

        let absorbing = GeneratorMatrix::from_rows(&[
            vec![-1.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let bad = TwoScaleGenerator::new(absorbing, ts.slow().clone(), 0.05, ts.partition().clone());
        assert!(matches!(bad, Err(Error::InvalidTwoScale(_))));
        assert!(ts.with_epsilon(0.0).is_err());
    }
}
