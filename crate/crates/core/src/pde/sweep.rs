//! ε-sweep of the PDE system: u^ε(t, x) along chain paths of
//! Q^ε = Q̃/ε + Q̂ against u(t, x) along paths of the aggregated chain with
//! the averaged reaction
//!
//! ```text
//! f̄(t, x, u, k) = Σ_j ν^k_j f(t, x, u, s_kj).
//! ```
//!
//! Only gradient-free reactions are averaged. The distributions over chain
//! paths are compared probe by probe.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homogenization::{check_jumps, sample_chains, DEFAULT_JUMP_CAP, DEFAULT_LADDER};
use crate::markov_chain::{ChainPath, QuasiStationaryDistribution, StatePartition, TwoScaleGenerator};
use crate::pde::feynman_kac::{check_probes, ProbePoint};
use crate::pde::problem::{PdeProblem, Reaction, ReactionArgs};
use crate::pde::solver::solve_pde;
use crate::stats::{ks_noise_floor, ks_statistic, wasserstein1, Estimate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdeSweepOptions {
    pub epsilons: Vec<f64>,
    /// Chain paths per ε (and for the limit).
    pub n_paths: usize,
    pub probes: Vec<ProbePoint>,
    pub initial_state: usize,
    pub seed: u64,
    pub jump_cap: f64,
    pub record_chains: bool,
}

impl Default for PdeSweepOptions {
    fn default() -> Self {
        Self {
            epsilons: DEFAULT_LADDER.to_vec(),
            n_paths: 1000,
            probes: vec![ProbePoint::new(0.0, 0.0)],
            initial_state: 0,
            seed: 0,
            jump_cap: DEFAULT_JUMP_CAP,
            record_chains: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeSweepRung {
    pub epsilon: f64,
    /// samples[probe·k + c][path]
    pub samples: Vec<Vec<f64>>,
    pub ks: Vec<f64>,
    pub wasserstein: Vec<f64>,
    /// E max_{probe, t} |u(t, x_probe)|².
    pub sup_u2: Estimate,
    /// E ∫ |∂_x u σ(t, x_probe)|² dt, averaged over probes.
    pub int_grad2: Estimate,
    pub mean_jumps: f64,
    pub seconds: f64,
    #[serde(skip)]
    pub chains: Vec<ChainPath>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeSweepReport {
    pub epsilons: Vec<f64>,
    pub n_paths: usize,
    pub probes: Vec<ProbePoint>,
    pub k: usize,
    pub limit_samples: Vec<Vec<f64>>,
    pub limit_sup_u2: Estimate,
    pub limit_int_grad2: Estimate,
    pub limit_seconds: f64,
    pub rungs: Vec<PdeSweepRung>,
    pub ks_noise_floor: f64,
    /// KS at the smallest ε ≤ KS at the largest ε + 3 noise floors, for
    /// every probe and component.
    pub trend_ok: bool,
    #[serde(skip)]
    pub limit_chains: Vec<ChainPath>,
}

/// f̄ over the aggregated states; requires a gradient-free reaction.
pub fn averaged_reaction(
    reaction: &Reaction,
    partition: &StatePartition,
    nus: &[QuasiStationaryDistribution],
) -> Result<Reaction> {
    if !reaction.gradient_free() {
        return Err(Error::GradientDependentReaction);
    }
    if nus.len() != partition.n_blocks() || nus.iter().zip(partition.blocks()).any(|(nu, b)| nu.len() != b.len()) {
        return Err(Error::DimensionMismatch("weights do not match the partition".into()));
    }
    let blocks: Vec<Vec<(usize, f64)>> = partition
        .blocks()
        .iter()
        .zip(nus)
        .map(|(b, nu)| b.iter().copied().zip(nu.nu().iter().copied()).collect())
        .collect();
    let base = reaction.clone();
    let k = reaction.k();
    Ok(Reaction::new(k, reaction.lipschitz(), true, move |args, out| {
        let mut tmp = vec![0.0; k];
        out.fill(0.0);
        for &(state, w) in &blocks[args.state] {
            base.eval_into(&ReactionArgs { state, ..*args }, &mut tmp);
            for (o, v) in out.iter_mut().zip(&tmp) {
                *o += w * v;
            }
        }
    }))
}

struct PathSummary {
    samples: Vec<f64>,
    sup_u2: f64,
    int_grad2: f64,
}

fn solve_ensemble(problem: &PdeProblem, chains: &[ChainPath], probes: &[ProbePoint]) -> Result<Vec<PathSummary>> {
    let k = problem.k();
    chains
        .par_iter()
        .map(|chain| {
            let sol = solve_pde(problem, chain)?;
            let mut samples = Vec::with_capacity(probes.len() * k);
            for p in probes {
                for c in 0..k {
                    samples.push(sol.value_at(p.t, p.x, c));
                }
            }
            let times = sol.times();
            let mut sup: f64 = 0.0;
            let mut int = 0.0;
            for p in probes {
                let mut prev: Option<f64> = None;
                for (i, &t) in times.iter().enumerate() {
                    let mut u2 = 0.0;
                    let mut g2 = 0.0;
                    for c in 0..k {
                        u2 += sol.value_at(t, p.x, c).powi(2);
                        g2 += sol.grad_sigma_at(t, p.x, c).powi(2);
                    }
                    sup = sup.max(u2);
                    if let Some(pg) = prev {
                        int += 0.5 * (pg + g2) * (t - times[i - 1]);
                    }
                    prev = Some(g2);
                }
            }
            Ok(PathSummary {
                samples,
                sup_u2: sup,
                int_grad2: int / probes.len() as f64,
            })
        })
        .collect()
}

fn columns(summaries: &[PathSummary], width: usize) -> Vec<Vec<f64>> {
    (0..width).map(|s| summaries.iter().map(|p| p.samples[s]).collect()).collect()
}

/// Run the sweep; chain paths are keyed exactly as in the BSDE sweep, so
/// equal seeds give equal chain ensembles.
pub fn pde_homogenization_sweep(
    problem: &PdeProblem,
    two_scale: &TwoScaleGenerator,
    opts: &PdeSweepOptions,
) -> Result<PdeSweepReport> {
    if !problem.reaction().gradient_free() {
        return Err(Error::GradientDependentReaction);
    }
    if opts.epsilons.is_empty() || opts.epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidArgument("epsilons must be positive and finite".into()));
    }
    if opts.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("epsilon ladder must be strictly decreasing".into()));
    }
    if opts.n_paths < 2 {
        return Err(Error::InvalidArgument("need at least two chain paths".into()));
    }
    if opts.initial_state >= two_scale.dim() {
        return Err(Error::UnknownState(opts.initial_state));
    }
    check_probes(problem, &opts.probes)?;
    let horizon = problem.grid().horizon;
    let k = problem.k();
    let width = opts.probes.len() * k;

    let started = Instant::now();
    let avg = averaged_reaction(problem.reaction(), two_scale.partition(), two_scale.quasi_stationary())?;
    let limit_problem = problem.clone().with_reaction(avg);
    let block0 = two_scale.partition().block_of(opts.initial_state)?;
    let limit_chains = sample_chains(&two_scale.aggregate(), block0, horizon, opts.n_paths, opts.seed, None);
    let limit = solve_ensemble(&limit_problem, &limit_chains, &opts.probes)?;
    let limit_samples = columns(&limit, width);
    let limit_seconds = started.elapsed().as_secs_f64();

    let mut rungs = Vec::with_capacity(opts.epsilons.len());
    for (r, &eps) in opts.epsilons.iter().enumerate() {
        let started = Instant::now();
        let q = two_scale.with_epsilon(eps)?.compose();
        check_jumps(&q, horizon, opts.jump_cap)?;
        let chains = sample_chains(&q, opts.initial_state, horizon, opts.n_paths, opts.seed, Some(r));
        let solved = solve_ensemble(problem, &chains, &opts.probes)?;
        let samples = columns(&solved, width);
        let ks = (0..width).map(|s| ks_statistic(&samples[s], &limit_samples[s])).collect();
        let wasserstein = (0..width).map(|s| wasserstein1(&samples[s], &limit_samples[s])).collect();
        let sup: Vec<f64> = solved.iter().map(|p| p.sup_u2).collect();
        let int: Vec<f64> = solved.iter().map(|p| p.int_grad2).collect();
        rungs.push(PdeSweepRung {
            epsilon: eps,
            samples,
            ks,
            wasserstein,
            sup_u2: Estimate::from_samples(&sup),
            int_grad2: Estimate::from_samples(&int),
            mean_jumps: chains.iter().map(|c| c.n_jumps() as f64).sum::<f64>() / chains.len() as f64,
            seconds: started.elapsed().as_secs_f64(),
            chains: if opts.record_chains { chains } else { Vec::new() },
        });
    }
    let floor = ks_noise_floor(opts.n_paths, opts.n_paths);
    let (first, last) = (&rungs[0], &rungs[rungs.len() - 1]);
    let trend_ok = first.ks.iter().zip(&last.ks).all(|(a, b)| *b <= a + 3.0 * floor);
    let sup: Vec<f64> = limit.iter().map(|p| p.sup_u2).collect();
    let int: Vec<f64> = limit.iter().map(|p| p.int_grad2).collect();
    Ok(PdeSweepReport {
        epsilons: opts.epsilons.clone(),
        n_paths: opts.n_paths,
        probes: opts.probes.clone(),
        k,
        limit_samples,
        limit_sup_u2: Estimate::from_samples(&sup),
        limit_int_grad2: Estimate::from_samples(&int),
        limit_seconds,
        rungs,
        ks_noise_floor: floor,
        trend_ok,
        limit_chains: if opts.record_chains { limit_chains } else { Vec::new() },
    })
}

impl PdeSweepReport {
    /// KS distance of series s = probe·k + c along the ladder.
    pub fn ks_series(&self, s: usize) -> Vec<f64> {
        self.rungs.iter().map(|r| r.ks[s]).collect()
    }

    /// Same columns as the BSDE sweep CSV. `component` enumerates
    /// probe·k + c; e_sup_y2 and e_int_z2 carry E max|u|² and E ∫|∂_x u σ|²
    /// at the probes.
    pub fn write_csv<W: Write>(&self, out: W, with_timings: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "epsilon",
            "component",
            "ks_distance",
            "wasserstein",
            "e_sup_y2",
            "e_int_z2",
            "n_paths",
            "seconds",
        ])?;
        for r in &self.rungs {
            for s in 0..r.ks.len() {
                let secs = if with_timings { format!("{}", r.seconds) } else { String::new() };
                w.write_record([
                    format!("{}", r.epsilon),
                    s.to_string(),
                    format!("{}", r.ks[s]),
                    format!("{}", r.wasserstein[s]),
                    format!("{}", r.sup_u2.mean),
                    format!("{}", r.int_grad2.mean),
                    self.n_paths.to_string(),
                    secs,
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
