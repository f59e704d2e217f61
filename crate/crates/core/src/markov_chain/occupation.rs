//! Occupation-measure deviation of a two-time-scale chain.
//!
//! For each block k and member j the quantity
//!
//! ```text
//! E ( ∫_s^T (1{α^ε_t = s_kj} − ν^k_j 1{ᾱ^ε_t = k}) β(t) dt )²
//! ```
//!
//! is estimated by Monte Carlo. The time integral is exact between jumps:
//! β is integrated over each holding interval by adaptive Simpson.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::path::simulate_chain;
use super::two_scale::TwoScaleGenerator;
use crate::error::{Error, Result};
use crate::rng::StreamKey;
use crate::stats::{loglog_slope, Estimate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationOptions {
    pub n_paths: usize,
    /// Lower limit s of the time integral.
    pub start: f64,
    pub horizon: f64,
    pub initial_state: usize,
    pub seed: u64,
}

impl Default for OccupationOptions {
    fn default() -> Self {
        Self {
            n_paths: 2000,
            start: 0.0,
            horizon: 1.0,
            initial_state: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationEntry {
    pub block: usize,
    pub member: usize,
    pub state: usize,
    pub estimate: Estimate,
    /// Singleton blocks make the integrand vanish identically.
    pub identically_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationReport {
    pub epsilon: f64,
    pub entries: Vec<OccupationEntry>,
}

/// ∫_a^b f by adaptive Simpson with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

pub fn occupation_deviation<B>(
    ts: &TwoScaleGenerator,
    beta: B,
    opts: &OccupationOptions,
) -> Result<OccupationReport>
where
    B: Fn(f64) -> f64 + Sync,
{
    if opts.n_paths < 100 {
        return Err(Error::InvalidArgument(format!(
            "occupation deviation needs at least 100 paths, got {}",
            opts.n_paths
        )));
    }
    if !(opts.horizon > opts.start) || opts.start < 0.0 {
        return Err(Error::InvalidArgument("need 0 <= start < horizon".into()));
    }
    let m = ts.dim();
    if opts.initial_state >= m {
        return Err(Error::UnknownState(opts.initial_state));
    }
    let q = ts.compose();
    let part = ts.partition();
    let nus = ts.quasi_stationary();
    let key = StreamKey::new(opts.seed)
        .label("occupation")
        .index(ts.epsilon().to_bits());

    // (block, member, state, ν) for every entry
    let targets: Vec<(usize, usize, usize, f64)> = part
        .blocks()
        .iter()
        .enumerate()
        .flat_map(|(k, block)| {
            block
                .iter()
                .enumerate()
                .map(move |(j, &s)| (k, j, s, nus[k].nu()[j]))
        })
        .collect();

    let per_path: Vec<Vec<f64>> = (0..opts.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = key.index(p as u64).rng();
            let path = simulate_chain(&q, opts.initial_state, 0.0, opts.horizon, &mut rng);
            let mut integrals = vec![0.0; targets.len()];
            for seg in path.segments_in(opts.start, opts.horizon) {
                let w = adaptive_simpson(&beta, seg.start, seg.end, 1e-13);
                let block = part.block_of(seg.state).expect("partition covers chain");
                for (e, &(k, _, s, nu)) in targets.iter().enumerate() {
                    let hit = if seg.state == s { w } else { 0.0 };
                    let agg = if block == k { w } else { 0.0 };
                    integrals[e] += hit - nu * agg;
                }
            }
            integrals.iter().map(|v| v * v).collect()
        })
        .collect();

    let entries = targets
        .iter()
        .enumerate()
        .map(|(e, &(k, j, s, _))| {
            let samples: Vec<f64> = per_path.iter().map(|v| v[e]).collect();
            OccupationEntry {
                block: k,
                member: j,
                state: s,
                estimate: Estimate::from_samples(&samples),
                identically_zero: part.block(k).len() == 1,
            }
        })
        .collect();
    Ok(OccupationReport {
        epsilon: ts.epsilon(),
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeEntry {
    pub block: usize,
    pub member: usize,
    pub state: usize,
    /// None when the deviation vanishes identically.
    pub slope: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationRateReport {
    pub epsilons: Vec<f64>,
    pub rungs: Vec<OccupationReport>,
    pub slopes: Vec<SlopeEntry>,
    pub min_slope: f64,
    pub pass: bool,
}

/// Run `occupation_deviation` over an ε ladder and regress log estimate on
/// log ε for every (k, j).
pub fn occupation_rate<B>(
    ts: &TwoScaleGenerator,
    beta: B,
    epsilons: &[f64],
    opts: &OccupationOptions,
    min_slope: f64,
) -> Result<OccupationRateReport>
where
    B: Fn(f64) -> f64 + Sync,
{
    if epsilons.len() < 2 {
        return Err(Error::InvalidArgument("need at least two epsilons".into()));
    }
    let rungs = epsilons
        .iter()
        .map(|&eps| occupation_deviation(&ts.with_epsilon(eps)?, &beta, opts))
        .collect::<Result<Vec<_>>>()?;
    let slopes: Vec<SlopeEntry> = rungs[0]
        .entries
        .iter()
        .enumerate()
        .map(|(e, entry)| {
            if entry.identically_zero {
                return SlopeEntry {
                    block: entry.block,
                    member: entry.member,
                    state: entry.state,
                    slope: None,
                    pass: rungs.iter().all(|r| r.entries[e].estimate.mean == 0.0),
                };
            }
            let ys: Vec<f64> = rungs.iter().map(|r| r.entries[e].estimate.mean).collect();
            let slope = loglog_slope(epsilons, &ys);
            SlopeEntry {
                block: entry.block,
                member: entry.member,
                state: entry.state,
                slope: Some(slope),
                pass: slope >= min_slope,
            }
        })
        .collect();
    let min = slopes
        .iter()
        .filter_map(|s| s.slope)
        .fold(f64::INFINITY, f64::min);
    Ok(OccupationRateReport {
        epsilons: epsilons.to_vec(),
        pass: slopes.iter().all(|s| s.pass),
        rungs,
        slopes,
        min_slope: min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov_chain::{GeneratorMatrix, StatePartition};

    #[test]
    fn simpson_polynomial_and_sine() {
        let f = |t: f64| 3.0 * t * t - t;
        assert!((adaptive_simpson(&f, 0.0, 2.0, 1e-12) - 6.0).abs() < 1e-12);
        let g = |t: f64| t.sin();
        assert!((adaptive_simpson(&g, 0.0, std::f64::consts::PI, 1e-12) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn singleton_partition_is_exactly_zero() {
        let slow = GeneratorMatrix::from_rows(&[
            vec![-2.0, 0.0, 2.0],
            vec![1.0, -2.0, 1.0],
            vec![1.0, 2.0, -3.0],
        ])
        .unwrap();
        let ts = TwoScaleGenerator::new(
            GeneratorMatrix::zeros(3),
            slow,
            0.1,
            StatePartition::singletons(3),
        )
        .unwrap();
        let opts = OccupationOptions {
            n_paths: 200,
            ..Default::default()
        };
        let rep = occupation_deviation(&ts, |t: f64| 1.0 + t.cos(), &opts).unwrap();
        for e in rep.entries {
            assert_eq!(e.estimate.mean, 0.0);
            assert!(e.identically_zero);
        }
    }

    #[test]
    fn too_few_paths_rejected() {
        let ts = TwoScaleGenerator::new(
            GeneratorMatrix::zeros(1),
            GeneratorMatrix::zeros(1),
            0.1,
            StatePartition::singletons(1),
        )
        .unwrap();
        let opts = OccupationOptions {
            n_paths: 10,
            ..Default::default()
        };
        assert!(occupation_deviation(&ts, |_| 1.0, &opts).is_err());
    }
}
