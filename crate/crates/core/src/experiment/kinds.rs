//! Parameter schemas and runners, one per experiment kind.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::specs::{generator, poly_eval, unit_poly, ChainSpec, ForwardSpec, FunctionSpec, PdeSpec, TerminalSpec, TwoScaleSpec};
use super::{ExperimentConfig, Outcome};
use crate::bsde::{
    a_priori_stats, martingale_residual_check, picard_solve_fbsde, solve_fbsde, solve_nested,
    BrownianEnsemble, BsdeSolution, Driver, ForwardModel, PicardOptions, TerminalCondition, TimeGrid,
    NESTED_INNER_DEFAULT,
};
use crate::error::{Error, Result};
use crate::homogenization::{
    averaged_ode_value, build_averaged_driver, epsilon_sweep, uniform_bound_check, SweepOptions, DEFAULT_JUMP_CAP,
    DEFAULT_LADDER,
};
use crate::lq_control::{
    optimality_report, sample_regime_paths, solve_optimal_with_steps, LqProblem, LqRegime, OptimalityOptions,
    OptimalityReport, RICCATI_STEPS,
};
use crate::markov_chain::{
    occupation_rate, simulate_chain, write_chain_paths_csv, ChainPath, OccupationOptions, TwoScaleGenerator,
};
use crate::pde::{
    feynman_kac_check_against, gradient_identity_check_against, growth_ratio, pde_homogenization_sweep, solve_pde,
    write_solutions_csv, FkOptions, PdeProblem, PdeSweepOptions, ProbeComparison, ProbePoint,
};
use crate::rng::StreamKey;
use crate::stats::{exact_mean, Estimate};

fn invalid(msg: impl Into<String>) -> Error {
    Error::ConfigInvalid(msg.into())
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(invalid(msg))
    }
}

fn csv_out(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn one_f() -> f64 {
    1.0
}
fn hundred() -> usize {
    100
}
fn thousand() -> usize {
    1000
}
fn ten_thousand() -> usize {
    10_000
}
fn yes() -> bool {
    true
}
fn ladder() -> Vec<f64> {
    DEFAULT_LADDER.to_vec()
}
fn jump_cap() -> f64 {
    DEFAULT_JUMP_CAP
}

pub(crate) fn validate(cfg: &ExperimentConfig) -> Result<()> {
    match cfg.kind.as_str() {
        "aggregate" => cfg.params::<AggregateParams>()?.check(),
        "simulate-chain" => cfg.params::<SimulateChainParams>()?.check(),
        "solve-bsde" => cfg.params::<SolveBsdeParams>()?.check(),
        "picard" => cfg.params::<PicardParams>()?.check(),
        "lq" => cfg.params::<LqParams>()?.check(),
        "sweep-bsde" => cfg.params::<SweepBsdeParams>()?.check(),
        "pde" => cfg.params::<PdeParams>()?.check(),
        "fk-check" => cfg.params::<FkCheckParams>()?.check(),
        "sweep-pde" => cfg.params::<SweepPdeParams>()?.check(),
        other => Err(Error::UnknownKind(other.to_string())),
    }
}

pub(crate) fn dispatch(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    let seed = cfg.seed;
    match cfg.kind.as_str() {
        "aggregate" => cfg.params::<AggregateParams>()?.run(dir),
        "simulate-chain" => cfg.params::<SimulateChainParams>()?.run(seed, dir),
        "solve-bsde" => cfg.params::<SolveBsdeParams>()?.run(seed, dir),
        "picard" => cfg.params::<PicardParams>()?.run(seed, dir),
        "lq" => cfg.params::<LqParams>()?.run(seed, dir),
        "sweep-bsde" => cfg.params::<SweepBsdeParams>()?.run(seed, dir),
        "pde" => cfg.params::<PdeParams>()?.run(seed, dir),
        "fk-check" => cfg.params::<FkCheckParams>()?.run(seed, dir),
        "sweep-pde" => cfg.params::<SweepPdeParams>()?.run(seed, dir),
        other => Err(Error::UnknownKind(other.to_string())),
    }
}

fn write_matrix_csv(dir: &Path, name: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(csv_out(dir, name)?);
    w.write_record(["row", "col", "value"])?;
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            w.write_record([i.to_string(), j.to_string(), fmt(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn max_abs_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> Option<f64> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        return None;
    }
    Some(
        a.iter()
            .zip(b)
            .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
            .fold(0.0, f64::max),
    )
}

// ---------------------------------------------------------------- aggregate

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AggregateParams {
    two_scale: TwoScaleSpec,
    #[serde(default)]
    expected: Option<AggregateExpected>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AggregateExpected {
    #[serde(default)]
    quasi_stationary: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    aggregated: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    composed: Option<Vec<Vec<f64>>>,
    #[serde(default = "tol_exact")]
    tol: f64,
}

fn tol_exact() -> f64 {
    1e-12
}

impl AggregateParams {
    fn check(&self) -> Result<()> {
        self.two_scale.build().map(|_| ())
    }

    fn run(&self, dir: &Path) -> Result<Outcome> {
        let ts = self.two_scale.build()?;
        let nus: Vec<Vec<f64>> = ts.quasi_stationary().iter().map(|q| q.nu().to_vec()).collect();
        let agg = ts.aggregate().to_rows();
        let comp = ts.compose().to_rows();
        let issues = ts.invariant_issues();
        write_matrix_csv(dir, "aggregated_generator.csv", &agg)?;
        write_matrix_csv(dir, "composed_generator.csv", &comp)?;
        let mut w = csv::Writer::from_writer(csv_out(dir, "quasi_stationary.csv")?);
        w.write_record(["block", "member", "state", "weight"])?;
        for (k, block) in ts.partition().blocks().iter().enumerate() {
            for (j, s) in block.iter().enumerate() {
                w.write_record([k.to_string(), j.to_string(), s.to_string(), fmt(nus[k][j])])?;
            }
        }
        w.flush()?;

        let mut verdicts = vec![("invariants".to_string(), issues.is_empty())];
        let mut errors = serde_json::Map::new();
        if let Some(exp) = &self.expected {
            for (name, want, got) in [
                ("quasi_stationary", &exp.quasi_stationary, &nus),
                ("aggregated", &exp.aggregated, &agg),
                ("composed", &exp.composed, &comp),
            ] {
                if let Some(want) = want {
                    let err = max_abs_diff(want, got);
                    errors.insert(name.to_string(), json!(err));
                    verdicts.push((format!("{name}_matches"), err.is_some_and(|e| e <= exp.tol)));
                }
            }
        }
        Ok(Outcome {
            verdicts,
            results: json!({
                "epsilon": ts.epsilon(),
                "quasi_stationary": nus,
                "aggregated_generator": agg,
                "composed_generator": comp,
                "invariant_issues": issues,
                "max_abs_errors": errors,
            }),
        })
    }
}

// ----------------------------------------------------------- simulate-chain

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateChainParams {
    #[serde(default)]
    generator: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    two_scale: Option<TwoScaleSpec>,
    #[serde(default)]
    initial_state: usize,
    #[serde(default = "one_f")]
    horizon: f64,
    #[serde(default = "hundred")]
    n_paths: usize,
    #[serde(default)]
    occupation_rate: Option<OccupationRateSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OccupationRateSpec {
    #[serde(default = "rate_ladder")]
    epsilons: Vec<f64>,
    #[serde(default = "two_thousand")]
    n_paths: usize,
    #[serde(default = "min_slope")]
    min_slope: f64,
    /// β(t) as polynomial coefficients.
    #[serde(default = "unit_poly")]
    beta: Vec<f64>,
    #[serde(default)]
    start: f64,
}

fn rate_ladder() -> Vec<f64> {
    DEFAULT_LADDER[..4].to_vec()
}
fn two_thousand() -> usize {
    2000
}
fn min_slope() -> f64 {
    0.8
}

impl SimulateChainParams {
    fn chain_generator(&self) -> Result<(crate::markov_chain::GeneratorMatrix, Option<TwoScaleGenerator>)> {
        match (&self.generator, &self.two_scale) {
            (Some(rows), None) => Ok((generator(rows, "generator")?, None)),
            (None, Some(ts)) => {
                let ts = ts.build()?;
                Ok((ts.compose(), Some(ts)))
            }
            _ => Err(invalid("give exactly one of `generator` and `two_scale`")),
        }
    }

    fn check(&self) -> Result<()> {
        let (q, ts) = self.chain_generator()?;
        ensure(self.initial_state < q.dim(), format!("initial_state {} out of range", self.initial_state))?;
        ensure(self.horizon > 0.0, "horizon must be positive")?;
        ensure(self.n_paths > 0, "n_paths must be positive")?;
        if let Some(o) = &self.occupation_rate {
            ensure(ts.is_some(), "occupation_rate needs `two_scale`")?;
            ensure(o.epsilons.len() >= 2 && o.epsilons.iter().all(|&e| e > 0.0), "occupation_rate.epsilons: at least two positive values")?;
            ensure(o.n_paths >= 100, "occupation_rate.n_paths must be at least 100")?;
            ensure(o.start >= 0.0 && o.start < self.horizon, "occupation_rate.start must lie in [0, horizon)")?;
        }
        Ok(())
    }

    fn run(&self, seed: u64, dir: &Path) -> Result<Outcome> {
        let (q, ts) = self.chain_generator()?;
        let key = StreamKey::new(seed).label("simulate-chain");
        let paths: Vec<ChainPath> = (0..self.n_paths)
            .map(|p| simulate_chain(&q, self.initial_state, 0.0, self.horizon, &mut key.index(p as u64).rng()))
            .collect();
        write_chain_paths_csv(csv_out(dir, "chain_paths.csv")?, &paths)?;
        let mut occ = vec![0.0; q.dim()];
        for p in &paths {
            for (o, v) in occ.iter_mut().zip(p.occupation(0.0, self.horizon, q.dim())) {
                *o += v / (self.horizon * paths.len() as f64);
            }
        }
        let jumps: Vec<f64> = paths.iter().map(|p| p.n_jumps() as f64).collect();
        let mut verdicts = Vec::new();
        let mut rate = Value::Null;
        if let (Some(o), Some(ts)) = (&self.occupation_rate, &ts) {
            let beta = o.beta.clone();
            let opts = OccupationOptions {
                n_paths: o.n_paths,
                start: o.start,
                horizon: self.horizon,
                initial_state: self.initial_state,
                seed,
            };
            let report = occupation_rate(ts, move |t| poly_eval(&beta, t), &o.epsilons, &opts, o.min_slope)?;
            let mut w = csv::Writer::from_writer(csv_out(dir, "occupation_rate.csv")?);
            w.write_record(["epsilon", "block", "member", "state", "mean", "se"])?;
            for r in &report.rungs {
                for e in &r.entries {
                    w.write_record([
                        fmt(r.epsilon),
                        e.block.to_string(),
                        e.member.to_string(),
                        e.state.to_string(),
                        fmt(e.estimate.mean),
                        fmt(e.estimate.se),
                    ])?;
                }
            }
            w.flush()?;
            verdicts.push(("occupation_rate".to_string(), report.pass));
            rate = json!({ "slopes": to_json(&report.slopes), "min_slope": report.min_slope, "pass": report.pass });
        }
        Ok(Outcome {
            verdicts,
            results: json!({
                "n_paths": self.n_paths,
                "mean_jumps": Estimate::from_samples(&jumps),
                "occupation_fractions": occ,
                "occupation_rate": rate,
            }),
        })
    }
}

// --------------------------------------------------------------- solve-bsde

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Method {
    #[default]
    Regression,
    Nested,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpectedValue {
    value: f64,
    rel_tol: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BsdeChecks {
    /// Y_0 (component 0) against a known value.
    #[serde(default)]
    y0: Option<ExpectedValue>,
    /// Y_0 against the exact occupation-time value along each chain path
    /// (state-constant or linear driver with constant ξ).
    #[serde(default)]
    path_oracle_rel_tol: Option<f64>,
    /// RMS of Z − value over paths and steps, relative to |value|.
    #[serde(default)]
    z_reference: Option<ExpectedValue>,
    /// Require the martingale-residual diagnostic to pass.
    #[serde(default)]
    martingale: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveBsdeParams {
    driver: FunctionSpec,
    terminal: TerminalSpec,
    #[serde(default)]
    forward: ForwardSpec,
    #[serde(default)]
    chain: ChainSpec,
    #[serde(default = "one_f")]
    horizon: f64,
    #[serde(default = "hundred")]
    steps: usize,
    #[serde(default = "thousand")]
    n_paths: usize,
    #[serde(default = "one")]
    brownian_dim: usize,
    #[serde(default)]
    method: Method,
    #[serde(default = "nested_inner")]
    nested_inner: usize,
    #[serde(default = "hundred")]
    csv_paths: usize,
    #[serde(default)]
    checks: BsdeChecks,
}

fn one() -> usize {
    1
}
fn nested_inner() -> usize {
    NESTED_INNER_DEFAULT
}

struct BsdeSetup {
    driver: Driver,
    xi: TerminalCondition,
    forward: ForwardModel,
    chains: Vec<ChainPath>,
    bm: BrownianEnsemble,
}

#[allow(clippy::too_many_arguments)]
fn bsde_check(
    driver: &FunctionSpec,
    terminal: &TerminalSpec,
    forward: &ForwardSpec,
    chain: &ChainSpec,
    horizon: f64,
    steps: usize,
    n_paths: usize,
    d: usize,
) -> Result<()> {
    ensure(horizon > 0.0 && steps > 0 && n_paths >= 2 && d > 0, "need horizon > 0, steps >= 1, n_paths >= 2, brownian_dim >= 1")?;
    let f = driver.driver(d)?;
    ensure(f.k() == terminal.k(), format!("driver has {} components, terminal {}", f.k(), terminal.k()))?;
    terminal.condition()?;
    let dt = horizon / steps as f64;
    ensure(
        dt * f.lipschitz() < 0.5,
        format!("step {dt} times Lipschitz constant {} must stay below 1/2", f.lipschitz()),
    )?;
    if let ForwardSpec::Diffusion { .. } = forward {
        ensure(d == 1, "a diffusion forward model needs brownian_dim = 1")?;
    }
    for c in chain.build(horizon, 0)? {
        if let Some(n) = driver.n_states() {
            ensure(c.max_state() < n, format!("chain visits state {} but the driver knows {n} states", c.max_state()))?;
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn bsde_setup(
    driver: &FunctionSpec,
    terminal: &TerminalSpec,
    forward: &ForwardSpec,
    chain: &ChainSpec,
    horizon: f64,
    steps: usize,
    n_paths: usize,
    d: usize,
    seed: u64,
    label: &str,
) -> Result<BsdeSetup> {
    let grid = TimeGrid::uniform(0.0, horizon, steps)?;
    Ok(BsdeSetup {
        driver: driver.driver(d)?,
        xi: terminal.condition()?,
        forward: forward.build(),
        chains: chain.build(horizon, seed)?,
        bm: BrownianEnsemble::sample(&grid, d, n_paths, StreamKey::new(seed).label(label).seed())?,
    })
}

/// Exact Y_0 along a chain path for state-constant or linear drivers with
/// constant terminal value.
fn path_oracle(driver: &FunctionSpec, terminal: &TerminalSpec, chain: &ChainPath, t: f64, horizon: f64) -> Option<f64> {
    let xi = match terminal {
        TerminalSpec::Constant { values } if values.len() == 1 => values[0],
        _ => return None,
    };
    let integral = |c: &[f64]| -> f64 {
        chain.occupation(t, horizon, c.len()).iter().zip(c).map(|(o, c)| o * c).sum()
    };
    match driver {
        FunctionSpec::StateConstant { values } => Some(xi + integral(values)),
        FunctionSpec::Linear { coeffs } => Some(xi * integral(coeffs).exp()),
        FunctionSpec::Zero { .. } => Some(xi),
        FunctionSpec::Affine { .. } => None,
    }
}

fn z_rms_error(sol: &BsdeSolution, value: f64) -> f64 {
    let mut acc = 0.0;
    let mut count = 0usize;
    for p in 0..sol.n_paths() {
        for i in 0..sol.steps() {
            for z in sol.z(p, i) {
                acc += (z - value).powi(2);
                count += 1;
            }
        }
    }
    (acc / count as f64).sqrt() / value.abs().max(f64::MIN_POSITIVE)
}

impl SolveBsdeParams {
    fn check(&self) -> Result<()> {
        bsde_check(&self.driver, &self.terminal, &self.forward, &self.chain, self.horizon, self.steps, self.n_paths, self.brownian_dim)?;
        if self.checks.path_oracle_rel_tol.is_some() {
            let probe = ChainPath::constant(0, 0.0, self.horizon);
            ensure(
                path_oracle(&self.driver, &self.terminal, &probe, 0.0, self.horizon).is_some(),
                "checks.path_oracle_rel_tol needs a zero, state_constant or linear driver and a scalar constant terminal",
            )?;
        }
        if self.method == Method::Nested {
            ensure(self.terminal.k() > 0 && self.forward == ForwardSpec::Brownian, "nested mode runs with a Brownian forward state")?;
        }
        Ok(())
    }

    fn run(&self, seed: u64, dir: &Path) -> Result<Outcome> {
        let s = bsde_setup(
            &self.driver,
            &self.terminal,
            &self.forward,
            &self.chain,
            self.horizon,
            self.steps,
            self.n_paths,
            self.brownian_dim,
            seed,
            "solve-bsde-brownian",
        )?;
        let k = s.driver.k();
        let mut per_chain = Vec::new();
        let mut verdicts = Vec::new();
        let mut w = csv::Writer::from_writer(csv_out(dir, "y0_by_chain.csv")?);
        w.write_record(["chain_id", "component", "y0", "oracle"])?;
        let (mut y0_ok, mut oracle_ok, mut z_ok, mut mart_ok) = (true, true, true, true);
        for (ci, chain) in s.chains.iter().enumerate() {
            let sol = match self.method {
                Method::Regression => solve_fbsde(&s.driver, &s.xi, &s.bm, &s.forward, chain)?,
                Method::Nested => solve_nested(&s.driver, &s.xi, &s.bm, chain, self.nested_inner)?,
            };
            if ci == 0 {
                sol.write_csv_paths(csv_out(dir, "bsde_solution.csv")?, self.csv_paths)?;
            }
            let y0: Vec<Estimate> = (0..k).map(|c| Estimate::from_samples(&sol.y0(c))).collect();
            let oracle = path_oracle(&self.driver, &self.terminal, chain, 0.0, self.horizon);
            for (c, e) in y0.iter().enumerate() {
                let o = if c == 0 { oracle.map(fmt).unwrap_or_default() } else { String::new() };
                w.write_record([ci.to_string(), c.to_string(), fmt(e.mean), o])?;
            }
            let mut entry = json!({
                "chain_id": ci,
                "n_jumps": chain.n_jumps(),
                "y0": y0,
                "a_priori": a_priori_stats(&sol),
                "diagnostics": to_json(sol.diagnostics()),
            });
            if let Some(exp) = &self.checks.y0 {
                let rel = (y0[0].mean - exp.value).abs() / exp.value.abs();
                entry["y0_rel_error"] = json!(rel);
                y0_ok &= rel <= exp.rel_tol;
            }
            if let (Some(tol), Some(o)) = (self.checks.path_oracle_rel_tol, oracle) {
                let rel = (y0[0].mean - o).abs() / o.abs().max(1e-300);
                entry["oracle"] = json!(o);
                entry["oracle_rel_error"] = json!(rel);
                oracle_ok &= rel <= tol;
            }
            if let Some(zr) = &self.checks.z_reference {
                let rel = z_rms_error(&sol, zr.value);
                entry["z_rms_rel_error"] = json!(rel);
                z_ok &= rel <= zr.rel_tol;
            }
            if self.method == Method::Regression {
                let m = martingale_residual_check(&sol, &s.driver, chain);
                mart_ok &= m.pass;
                entry["martingale"] = to_json(&m);
            }
            per_chain.push(entry);
        }
        w.flush()?;
        if self.checks.y0.is_some() {
            verdicts.push(("y0".to_string(), y0_ok));
        }
        if self.checks.path_oracle_rel_tol.is_some() {
            verdicts.push(("path_oracle".to_string(), oracle_ok));
        }
        if self.checks.z_reference.is_some() {
            verdicts.push(("z_reference".to_string(), z_ok));
        }
        if self.checks.martingale {
            verdicts.push(("martingale_residual".to_string(), mart_ok));
        }
        Ok(Outcome {
            verdicts,
            results: json!({ "n_paths": self.n_paths, "steps": self.steps, "chains": per_chain }),
        })
    }
}

// ------------------------------------------------------------------- picard

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PicardChecks {
    #[serde(default)]
    max_iterations: Option<usize>,
    #[serde(default = "yes")]
    contraction: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PicardParams {
    driver: FunctionSpec,
    terminal: TerminalSpec,
    #[serde(default)]
    forward: ForwardSpec,
    #[serde(default)]
    chain: ChainSpec,
    #[serde(default = "one_f")]
    horizon: f64,
    #[serde(default = "hundred")]
    steps: usize,
    #[serde(default = "thousand")]
    n_paths: usize,
    #[serde(default = "one")]
    brownian_dim: usize,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default = "fifty")]
    max_iters: usize,
    #[serde(default = "picard_tol")]
    tol: f64,
    #[serde(default)]
    checks: Option<PicardChecks>,
}

fn fifty() -> usize {
    50
}
fn picard_tol() -> f64 {
    1e-8
}

impl PicardParams {
    fn check(&self) -> Result<()> {
        bsde_check(&self.driver, &self.terminal, &self.forward, &self.chain, self.horizon, self.steps, self.n_paths, self.brownian_dim)?;
        ensure(!matches!(self.chain, ChainSpec::Sampled { count, .. } if count != 1), "picard runs along a single chain path")?;
        ensure(self.beta.is_none_or(|b| b > 0.0), "beta must be positive")?;
        ensure(self.max_iters > 0 && self.tol > 0.0, "need max_iters >= 1 and tol > 0")
    }

    fn run(&self, seed: u64, dir: &Path) -> Result<Outcome> {
        let s = bsde_setup(
            &self.driver,
            &self.terminal,
            &self.forward,
            &self.chain,
            self.horizon,
            self.steps,
            self.n_paths,
            self.brownian_dim,
            seed,
            "picard-brownian",
        )?;
        let chain = &s.chains[0];
        let opts = PicardOptions {
            beta: self.beta,
            max_iters: self.max_iters,
            tol: self.tol,
        };
        let (sol, report) = picard_solve_fbsde(&s.driver, &s.xi, &s.bm, &s.forward, chain, &opts)?;
        let implicit = solve_fbsde(&s.driver, &s.xi, &s.bm, &s.forward, chain)?;
        let mut w = csv::Writer::from_writer(csv_out(dir, "picard_differences.csv")?);
        w.write_record(["iteration", "difference", "ratio"])?;
        for (n, d) in report.differences.iter().enumerate() {
            let ratio = if n == 0 { String::new() } else { fmt(report.ratios[n - 1]) };
            w.write_record([(n + 1).to_string(), fmt(*d), ratio])?;
        }
        w.flush()?;
        let checks = self.checks.as_ref();
        let mut verdicts = vec![("converged".to_string(), report.converged)];
        if checks.is_none_or(|c| c.contraction) {
            verdicts.push(("contracting".to_string(), report.contracting()));
        }
        if let Some(max) = checks.and_then(|c| c.max_iterations) {
            verdicts.push(("iteration_count".to_string(), report.iterations <= max));
        }
        let y0p: Vec<f64> = (0..s.driver.k()).map(|c| exact_mean(&sol.y0(c))).collect();
        let y0i: Vec<f64> = (0..s.driver.k()).map(|c| exact_mean(&implicit.y0(c))).collect();
        Ok(Outcome {
            verdicts,
            results: json!({
                "contraction": to_json(&report),
                "y0_picard": y0p,
                "y0_implicit": y0i,
                "max_ratio": report.ratios.iter().copied().fold(0.0, f64::max),
            }),
        })
    }
}

// ----------------------------------------------------------------------- lq

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimalitySpec {
    #[serde(default = "hundred")]
    n_perturbations: usize,
    #[serde(default = "default_deltas")]
    deltas: Vec<f64>,
    #[serde(default = "four")]
    pieces: usize,
    #[serde(default = "three")]
    z_score: f64,
    #[serde(default = "five_percent")]
    convexity_rel_tol: f64,
}

impl Default for OptimalitySpec {
    fn default() -> Self {
        let d = OptimalityOptions::default();
        Self {
            n_perturbations: d.n_perturbations,
            deltas: d.deltas,
            pieces: d.pieces,
            z_score: d.z_score,
            convexity_rel_tol: d.convexity_rel_tol,
        }
    }
}

fn default_deltas() -> Vec<f64> {
    OptimalityOptions::default().deltas
}
fn four() -> usize {
    4
}
fn three() -> f64 {
    3.0
}
fn five_percent() -> f64 {
    0.05
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LqChecks {
    /// P_i(0) per regime.
    #[serde(default)]
    expected_p0: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default = "p0_tol")]
    p0_tol: f64,
}

fn p0_tol() -> f64 {
    1e-4
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LqParams {
    regimes: Vec<LqRegime>,
    generator: Vec<Vec<f64>>,
    #[serde(default = "one_f")]
    horizon: f64,
    x0: Vec<f64>,
    #[serde(default)]
    initial_regime: usize,
    #[serde(default = "riccati_steps")]
    riccati_steps: usize,
    #[serde(default = "two_hundred")]
    n_paths: usize,
    #[serde(default = "four_hundred")]
    sim_steps: usize,
    #[serde(default)]
    optimality: OptimalitySpec,
    /// Also certify P scaled by this factor, which must be rejected.
    #[serde(default)]
    negative_control_scale: Option<f64>,
    #[serde(default)]
    checks: LqChecks,
}

fn riccati_steps() -> usize {
    RICCATI_STEPS
}
fn two_hundred() -> usize {
    200
}
fn four_hundred() -> usize {
    400
}

fn write_checks_csv(dir: &Path, name: &str, report: &OptimalityReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(csv_out(dir, name)?);
    w.write_record([
        "index",
        "delta",
        "difference",
        "difference_se",
        "convexity_bound",
        "first_order",
        "first_order_se",
        "dominance_ok",
        "convexity_ok",
        "stationarity_ok",
    ])?;
    for c in &report.checks {
        w.write_record([
            c.index.to_string(),
            fmt(c.delta),
            fmt(c.difference.mean),
            fmt(c.difference.se),
            fmt(c.convexity_bound),
            fmt(c.first_order.mean),
            fmt(c.first_order.se),
            c.dominance_ok.to_string(),
            c.convexity_ok.to_string(),
            c.stationarity_ok.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

impl LqParams {
    fn problem(&self) -> Result<LqProblem> {
        Ok(LqProblem {
            regimes: self.regimes.clone(),
            generator: generator(&self.generator, "generator")?,
            horizon: self.horizon,
            x0: self.x0.clone(),
            initial_regime: self.initial_regime,
        })
    }

    fn check(&self) -> Result<()> {
        self.problem()?.validate().map_err(|e| invalid(e.to_string()))?;
        ensure(self.riccati_steps > 0 && self.sim_steps > 0 && self.n_paths >= 2, "need riccati_steps, sim_steps >= 1 and n_paths >= 2")?;
        ensure(self.negative_control_scale.is_none_or(|s| s > 0.0 && s != 1.0), "negative_control_scale must be positive and differ from 1")
    }

    fn run(&self, seed: u64, dir: &Path) -> Result<Outcome> {
        let problem = self.problem()?;
        let fb = solve_optimal_with_steps(&problem, self.riccati_steps)?;
        let grid = TimeGrid::uniform(0.0, self.horizon, self.sim_steps)?;
        let dim = self.regimes[0].c.len();
        let bm = BrownianEnsemble::sample(&grid, dim, self.n_paths, StreamKey::new(seed).label("lq-brownian").seed())?;
        let chains = sample_regime_paths(&problem, self.n_paths, seed);
        let o = &self.optimality;
        let opts = OptimalityOptions {
            n_perturbations: o.n_perturbations,
            deltas: o.deltas.clone(),
            pieces: o.pieces,
            z_score: o.z_score,
            convexity_rel_tol: o.convexity_rel_tol,
            seed,
        };
        let report = optimality_report(&problem, &fb, &opts, &chains, &bm)?;
        write_checks_csv(dir, "perturbations.csv", &report)?;

        let mut w = csv::Writer::from_writer(csv_out(dir, "riccati.csv")?);
        w.write_record(["t", "regime", "row", "col", "value"])?;
        let n_x = self.x0.len();
        for &t in fb.times() {
            for r in 0..self.regimes.len() {
                let p = fb.p_at(t, r);
                for i in 0..n_x {
                    for j in 0..n_x {
                        w.write_record([fmt(t), r.to_string(), i.to_string(), j.to_string(), fmt(p[(i, j)])])?;
                    }
                }
            }
        }
        w.flush()?;

        let p0: Vec<Vec<Vec<f64>>> = (0..self.regimes.len())
            .map(|r| {
                let p = fb.p_at(0.0, r);
                (0..n_x).map(|i| (0..n_x).map(|j| p[(i, j)]).collect()).collect()
            })
            .collect();
        let mut verdicts = vec![
            ("dominance".to_string(), report.dominance_pass),
            ("stationarity".to_string(), report.stationarity_pass),
            ("convexity".to_string(), report.convexity_pass),
        ];
        let mut results = json!({
            "p0": p0,
            "value_formula": fb.value(),
            "psd_check": fb.psd_check(),
            "optimality": {
                "summary": report.summary(),
                "cost": report.cost,
                "delta_n": report.delta_n,
                "comparisons": report.comparisons,
                "dominance_failures": report.dominance_failures,
                "stationarity_failures": report.stationarity_failures,
                "convexity_failures": report.convexity_failures,
                "max_first_order_t": report.max_first_order_t,
            },
        });
        if let Some(exp) = &self.checks.expected_p0 {
            let err = exp
                .iter()
                .zip(&p0)
                .map(|(a, b)| max_abs_diff(a, b).unwrap_or(f64::INFINITY))
                .fold(if exp.len() == p0.len() { 0.0 } else { f64::INFINITY }, f64::max);
            results["p0_max_abs_error"] = json!(err);
            verdicts.push(("p0_matches".to_string(), err <= self.checks.p0_tol));
        }
        if let Some(scale) = self.negative_control_scale {
            let neg = optimality_report(&problem, &fb.scaled(scale), &opts, &chains, &bm)?;
            write_checks_csv(dir, "negative_control.csv", &neg)?;
            results["negative_control"] = json!({ "scale": scale, "summary": neg.summary(), "pass": neg.pass });
            verdicts.push(("negative_control_rejected".to_string(), !neg.pass));
        }
        Ok(Outcome { verdicts, results })
    }
}

// --------------------------------------------------------------- sweep-bsde

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepChecks {
    /// KS(smallest ε) / KS(largest ε) must stay below this, per component.
    #[serde(default)]
    ks_ratio_max: Option<f64>,
    /// max/min of E(sup|Y|² + ∫|Z|²) along the ladder.
    #[serde(default)]
    a_priori_ratio_max: Option<f64>,
    /// Limit Y_0 against exact occupation quadrature (absolute).
    #[serde(default)]
    limit_oracle_tol: Option<f64>,
    /// Mean Y_0 at the smallest ε against the averaged ODE (single block).
    #[serde(default)]
    ode_mean_rel_tol: Option<f64>,
    /// sd(Y_0) at the largest ε over sd at the smallest ε.
    #[serde(default)]
    std_reduction_min: Option<f64>,
    #[serde(default = "yes")]
    trend: bool,
}

impl Default for SweepChecks {
    fn default() -> Self {
        Self {
            ks_ratio_max: None,
            a_priori_ratio_max: None,
            limit_oracle_tol: None,
            ode_mean_rel_tol: None,
            std_reduction_min: None,
            trend: true,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepBsdeParams {
    two_scale: TwoScaleSpec,
    driver: FunctionSpec,
    terminal: TerminalSpec,
    #[serde(default = "ladder")]
    epsilons: Vec<f64>,
    #[serde(default = "thousand")]
    n_paths: usize,
    #[serde(default = "one")]
    n_brownian: usize,
    #[serde(default = "hundred")]
    steps: usize,
    #[serde(default = "one_f")]
    horizon: f64,
    #[serde(default)]
    initial_state: usize,
    #[serde(default = "jump_cap")]
    jump_cap: f64,
    #[serde(default)]
    checks: SweepChecks,
}

/// c̄_k = Σ_j ν^k_j c_{s_kj} for a state-constant driver.
fn averaged_constants(ts: &TwoScaleGenerator, values: &[f64]) -> Vec<f64> {
    ts.partition()
        .blocks()
        .iter()
        .zip(ts.quasi_stationary())
        .map(|(b, nu)| b.iter().zip(nu.nu()).map(|(&s, w)| w * values[s]).sum())
        .collect()
}

impl SweepBsdeParams {
    fn options(&self, seed: u64, record: bool) -> SweepOptions {
        SweepOptions {
            epsilons: self.epsilons.clone(),
            n_paths: self.n_paths,
            n_brownian: self.n_brownian,
            steps: self.steps,
            horizon: self.horizon,
            initial_state: self.initial_state,
            seed,
            jump_cap: self.jump_cap,
            record_chains: record,
        }
    }

    fn check(&self) -> Result<()> {
        let ts = self.two_scale.build()?;
        let f = self.driver.driver(1)?;
        ensure(f.z_independent(), "sweep-bsde needs a z-independent driver")?;
        ensure(f.k() == self.terminal.k(), "driver and terminal disagree on the number of components")?;
        self.terminal.condition()?;
        if let Some(n) = self.driver.n_states() {
            ensure(n >= ts.dim(), format!("driver knows {n} states, chain has {}", ts.dim()))?;
        }
        ensure(self.initial_state < ts.dim(), "initial_state out of range")?;
        ensure(self.horizon / self.steps.max(1) as f64 * f.lipschitz() < 0.5, "time step too large for the driver's Lipschitz constant")?;
        let opts = self.options(0, false);
        ensure(
            !opts.epsilons.is_empty() && opts.epsilons.iter().all(|&e| e > 0.0) && opts.epsilons.windows(2).all(|w| w[1] < w[0]),
            "epsilons must be positive and strictly decreasing",
        )?;
        ensure(self.n_paths >= 2 && self.n_brownian >= 1 && self.steps >= 1 && self.horizon > 0.0, "need n_paths >= 2, n_brownian >= 1, steps >= 1, horizon > 0")?;
        if self.checks.limit_oracle_tol.is_some() {
            ensure(
                matches!(self.driver, FunctionSpec::StateConstant { .. })
                    && matches!(&self.terminal, TerminalSpec::Constant { values } if values.len() == 1),
                "checks.limit_oracle_tol needs a state_constant driver and a scalar constant terminal",
            )?;
        }
        if self.checks.ode_mean_rel_tol.is_some() {
            ensure(ts.partition().n_blocks() == 1, "checks.ode_mean_rel_tol needs a single-block partition")?;
            ensure(matches!(self.terminal, TerminalSpec::Constant { .. }), "checks.ode_mean_rel_tol needs a constant terminal")?;
        }
        Ok(())
    }

    fn run(&self, seed: u64, dir: &Path) -> Result<Outcome> {
        let ts = self.two_scale.build()?;
        let driver = self.driver.driver(1)?;
        let xi = self.terminal.condition()?;
        let record = self.checks.limit_oracle_tol.is_some();
        let report = epsilon_sweep(&ts, &driver, &xi, &self.options(seed, record))?;
        report.write_csv(csv_out(dir, "sweep.csv")?, false)?;
        let mut w = csv::Writer::from_writer(csv_out(dir, "y0_samples.csv")?);
        w.write_record(["ensemble", "epsilon", "path_id", "component", "y0"])?;
        for (c, col) in report.limit_y0.iter().enumerate() {
            for (p, v) in col.iter().enumerate() {
                w.write_record(["limit".to_string(), String::new(), p.to_string(), c.to_string(), fmt(*v)])?;
            }
        }
        for r in &report.rungs {
            for (c, col) in r.y0.iter().enumerate() {
                for (p, v) in col.iter().enumerate() {
                    w.write_record(["epsilon".to_string(), fmt(r.epsilon), p.to_string(), c.to_string(), fmt(*v)])?;
                }
            }
        }
        w.flush()?;

        let k = driver.k();
        let rungs: Vec<Value> = report
            .rungs
            .iter()
            .map(|r| {
                json!({
                    "epsilon": r.epsilon,
                    "ks": r.ks,
                    "wasserstein": r.wasserstein,
                    "sup_y2": r.sup_y2,
                    "int_z2": r.int_z2,
                    "a_priori": r.a_priori,
                    "occupation_tv": r.occupation_tv,
                    "mean_jumps": r.mean_jumps,
                    "y0": (0..k).map(|c| Estimate::from_samples(&r.y0[c])).collect::<Vec<_>>(),
                    "seconds": r.seconds,
                })
            })
            .collect();
        let mut results = json!({
            "epsilons": report.epsilons,
            "n_paths": report.n_paths,
            "n_brownian": report.n_brownian,
            "ks_noise_floor": report.ks_noise_floor,
            "trend_ok": report.trend_ok,
            "limit_y0": (0..k).map(|c| Estimate::from_samples(&report.limit_y0[c])).collect::<Vec<_>>(),
            "limit_a_priori": report.limit_a_priori,
            "limit_seconds": report.limit_seconds,
            "rungs": rungs,
        });
        let mut verdicts = Vec::new();
        if self.checks.trend {
            verdicts.push(("ks_trend".to_string(), report.trend_ok));
        }
        let (first, last) = (&report.rungs[0], &report.rungs[report.rungs.len() - 1]);
        if let Some(max) = self.checks.ks_ratio_max {
            let ratios: Vec<f64> = first.ks.iter().zip(&last.ks).map(|(a, b)| b / a).collect();
            verdicts.push(("ks_ratio".to_string(), ratios.iter().all(|r| *r < max)));
            results["ks_ratios"] = json!(ratios);
        }
        if let Some(max) = self.checks.a_priori_ratio_max {
            let b = uniform_bound_check(&report, max);
            verdicts.push(("a_priori_bound".to_string(), b.pass));
            results["a_priori_bound"] = to_json(&b);
        }
        if let (Some(tol), FunctionSpec::StateConstant { values }, TerminalSpec::Constant { values: xi }) =
            (self.checks.limit_oracle_tol, &self.driver, &self.terminal)
        {
            let cbar = averaged_constants(&ts, values);
            let worst = report
                .limit_chains
                .iter()
                .zip(&report.limit_y0[0])
                .map(|(ch, y)| {
                    let exact: f64 = xi[0]
                        + ch.occupation(0.0, self.horizon, cbar.len()).iter().zip(&cbar).map(|(o, c)| o * c).sum::<f64>();
                    (y - exact).abs()
                })
                .fold(0.0, f64::max);
            results["limit_oracle_max_abs_error"] = json!(worst);
            verdicts.push(("limit_oracle".to_string(), worst <= tol));
        }
        if let Some(tol) = self.checks.ode_mean_rel_tol {
            let avg = build_averaged_driver(&driver, ts.partition(), ts.quasi_stationary())?;
            let terminal = match &self.terminal {
                TerminalSpec::Constant { values } => values.clone(),
                _ => unreachable!("validated"),
            };
            let ode = averaged_ode_value(&avg, 0, &terminal, 0.0, self.horizon, 1000)[0];
            let mean = Estimate::from_samples(&last.y0[0]).mean;
            let rel = (mean - ode).abs() / ode.abs();
            results["ode_value"] = json!(ode);
            results["ode_mean_rel_error"] = json!(rel);
            verdicts.push(("ode_mean".to_string(), rel <= tol));
        }
        if let Some(min) = self.checks.std_reduction_min {
            let (a, b) = (Estimate::from_samples(&first.y0[0]).std_dev(), Estimate::from_samples(&last.y0[0]).std_dev());
            let factor = a / b;
            results["std_reduction"] = json!(factor);
            verdicts.push(("std_reduction".to_string(), factor >= min));
        }
        Ok(Outcome { verdicts, results })
    }
}

// ---------------------------------------------------------------------- pde

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ClosedForm {
    /// f ≡ 0, b ≡ 0, constant σ, Gaussian h: heat-kernel convolution.
    HeatGaussian { max_abs_error: f64 },
    /// Linear reaction c_i u with constant h: h·exp(∫_t^T c(α_r) dr).
    IntegratingFactor { max_rel_error: f64 },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PdeChecks {
    #[serde(default)]
    closed_form: Option<ClosedForm>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PdeParams {
    problem: PdeSpec,
    #[serde(default)]
    chain: ChainSpec,
    #[serde(default = "yes")]
    write_field: bool,
    #[serde(default)]
    checks: PdeChecks,
}

fn is_zero_poly(p: &[f64]) -> bool {
    p.iter().all(|&a| a == 0.0)
}

/// Exact field for the supported closed forms.
fn closed_form_value(spec: &PdeSpec, form: &ClosedForm, chain: &ChainPath, t: f64, x: f64) -> f64 {
    let horizon = spec.grid.horizon;
    match (form, &spec.terminal, &spec.reaction) {
        (ClosedForm::HeatGaussian { .. }, TerminalSpec::Gaussian { variance, amplitude }, _) => {
            let s2 = spec.sigma[0] * spec.sigma[0];
            let v = variance + s2 * (horizon - t);
            amplitude * (variance / v).sqrt() * (-x * x / (2.0 * v)).exp()
        }
        (ClosedForm::IntegratingFactor { .. }, TerminalSpec::Constant { values }, FunctionSpec::Linear { coeffs }) => {
            let occ = chain.occupation(t, horizon, coeffs.len());
            values[0] * occ.iter().zip(coeffs).map(|(o, c)| o * c).sum::<f64>().exp()
        }
        _ => f64::NAN,
    }
}

fn check_closed_form(spec: &PdeSpec, form: &ClosedForm) -> Result<()> {
    match form {
        ClosedForm::HeatGaussian { .. } => ensure(
            matches!(spec.reaction, FunctionSpec::Zero { k: 1 })
                && is_zero_poly(&spec.drift)
                && spec.sigma.len() == 1
                && matches!(spec.terminal, TerminalSpec::Gaussian { .. }),
            "heat_gaussian closed form needs reaction zero, drift [0], constant sigma and gaussian terminal",
        ),
        ClosedForm::IntegratingFactor { .. } => ensure(
            matches!(spec.reaction, FunctionSpec::Linear { .. })
                && matches!(&spec.terminal, TerminalSpec::Constant { values } if values.len() == 1),
            "integrating_factor closed form needs a linear reaction and a scalar constant terminal",
        ),
    }
}

fn check_chain_states(spec: &PdeSpec, chains: &[ChainPath]) -> Result<()> {
    if let Some(n) = spec.reaction.n_states() {
        for c in chains {
            ensure(c.max_state() < n, format!("chain visits state {} but the reaction knows {n} states", c.max_state()))?;
        }
    }
    Ok(())
}

impl PdeParams {
    fn check(&self) -> Result<()> {
        self.problem.build()?;
        let chains = self.chain.build(self.problem.grid.horizon, 0)?;
        check_chain_states(&self.problem, &chains)?;
        if let Some(form) = &self.checks.closed_form {
            check_closed_form(&self.problem, form)?;
        }
        Ok(())
    }

    fn run(&self, seed: u64, dir: &Path) -> Result<Outcome> {
        let problem = self.problem.build()?;
        let chains = self.chain.build(self.problem.grid.horizon, seed)?;
        let sols = chains.iter().map(|c| solve_pde(&problem, c)).collect::<Result<Vec<_>>>()?;
        if self.write_field {
            write_solutions_csv(csv_out(dir, "pde_solution.csv")?, &sols, 0)?;
        }
        let mut per_chain = Vec::new();
        let mut ok = true;
        for (ci, sol) in sols.iter().enumerate() {
            let level0 = sol.level(0);
            let mut entry = json!({
                "chain_id": ci,
                "n_jumps": sol.chain().n_jumps(),
                "time_levels": sol.times().len(),
                "u0_min": level0.iter().copied().fold(f64::INFINITY, f64::min),
                "u0_max": level0.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                "growth_ratio": growth_ratio(sol),
            });
            if let Some(form) = &self.checks.closed_form {
                let mut worst: f64 = 0.0;
                for (ti, &t) in sol.times().iter().enumerate() {
                    for (j, &x) in sol.xs().iter().enumerate() {
                        let exact = closed_form_value(&self.problem, form, sol.chain(), t, x);
                        let err = match form {
                            ClosedForm::HeatGaussian { .. } => (sol.u(ti, j, 0) - exact).abs(),
                            ClosedForm::IntegratingFactor { .. } => (sol.u(ti, j, 0) / exact - 1.0).abs(),
                        };
                        worst = worst.max(err);
                    }
                }
                let tol = match form {
                    ClosedForm::HeatGaussian { max_abs_error } => *max_abs_error,
                    ClosedForm::IntegratingFactor { max_rel_error } => *max_rel_error,
                };
                entry["closed_form_error"] = json!(worst);
                ok &= worst <= tol;
            }
            per_chain.push(entry);
        }
        let verdicts = if self.checks.closed_form.is_some() {
            vec![("closed_form".to_string(), ok)]
        } else {
            Vec::new()
        };
        Ok(Outcome {
            verdicts,
            results: json!({ "grid": self.problem.grid, "chains": per_chain }),
        })
    }
}

// ----------------------------------------------------------------- fk-check

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FkCheckParams {
    problem: PdeSpec,
    #[serde(default)]
    chain: ChainSpec,
    probes: Vec<ProbePoint>,
    #[serde(default = "ten_thousand")]
    n_mc: usize,
    #[serde(default = "ten")]
    batches: usize,
    #[serde(default = "hundred")]
    steps: usize,
    #[serde(default = "two_percent")]
    rel_tol: f64,
    #[serde(default = "ten_percent")]
    grad_rel_tol: f64,
    #[serde(default = "three")]
    z_score: f64,
    #[serde(default = "yes")]
    gradient: bool,
    /// Also compare a PDE field scaled by this factor, which must fail.
    #[serde(default)]
    negative_control_scale: Option<f64>,
}

fn ten() -> usize {
    10
}
fn two_percent() -> f64 {
    2e-2
}
fn ten_percent() -> f64 {
    0.1
}

fn write_probe_rows(w: &mut csv::Writer<BufWriter<File>>, check: &str, rows: &[ProbeComparison]) -> Result<()> {
    for r in rows {
        w.write_record([
            check.to_string(),
            fmt(r.t),
            fmt(r.x),
            r.component.to_string(),
            fmt(r.pde),
            fmt(r.bsde.mean),
            fmt(r.bsde.se),
            fmt(r.discrepancy),
            fmt(r.allowance),
            r.pass.to_string(),
        ])?;
    }
    Ok(())
}

impl FkCheckParams {
    fn options(&self, seed: u64) -> FkOptions {
        FkOptions {
            n_mc: self.n_mc,
            batches: self.batches,
            steps: self.steps,
            rel_tol: self.rel_tol,
            grad_rel_tol: self.grad_rel_tol,
            z_score: self.z_score,
            seed,
        }
    }

    fn check(&self) -> Result<()> {
        let problem = self.problem.build()?;
        let chains = self.chain.build(self.problem.grid.horizon, 0)?;
        ensure(chains.len() == 1, "fk-check runs along a single chain path")?;
        check_chain_states(&self.problem, &chains)?;
        crate::pde::check_probes(&problem, &self.probes)?;
        ensure(self.batches >= 2 && self.n_mc >= 2 * self.batches && self.steps >= 1, "need batches >= 2, n_mc >= 2·batches, steps >= 1")?;
        let dt = self.problem.grid.horizon / self.steps as f64;
        ensure(dt * problem.reaction().lipschitz() < 0.5, "BSDE step too large for the reaction's Lipschitz constant")?;
        ensure(self.negative_control_scale.is_none_or(|s| s != 1.0), "negative_control_scale must differ from 1")
    }

    fn run(&self, seed: u64, dir: &Path) -> Result<Outcome> {
        let problem: PdeProblem = self.problem.build()?;
        let chain = self.chain.build(self.problem.grid.horizon, seed)?.remove(0);
        let opts = self.options(seed);
        let pde = solve_pde(&problem, &chain)?;
        let fk = feynman_kac_check_against(&problem, &chain, &self.probes, &opts, &pde)?;
        let mut w = csv::Writer::from_writer(csv_out(dir, "fk_probes.csv")?);
        w.write_record(["check", "t", "x", "component", "pde", "bsde", "se", "discrepancy", "allowance", "pass"])?;
        write_probe_rows(&mut w, "feynman_kac", &fk.probes)?;
        let mut verdicts = vec![("feynman_kac".to_string(), fk.pass)];
        let mut results = json!({ "feynman_kac": to_json(&fk) });
        if self.gradient {
            let gr = gradient_identity_check_against(&problem, &chain, &self.probes, &opts, &pde)?;
            write_probe_rows(&mut w, "gradient", &gr.probes)?;
            verdicts.push(("gradient_identity".to_string(), gr.pass));
            results["gradient"] = to_json(&gr);
        }
        if let Some(scale) = self.negative_control_scale {
            let neg = feynman_kac_check_against(&problem, &chain, &self.probes, &opts, &pde.scaled(scale))?;
            write_probe_rows(&mut w, "negative_control", &neg.probes)?;
            verdicts.push(("negative_control_rejected".to_string(), !neg.pass));
            results["negative_control"] = json!({ "scale": scale, "pass": neg.pass });
        }
        w.flush()?;
        Ok(Outcome { verdicts, results })
    }
}

// ---------------------------------------------------------------- sweep-pde

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PdeSweepChecks {
    #[serde(default)]
    ks_ratio_max: Option<f64>,
    /// Relative agreement of every sample with h·exp(∫_t^T c(α) dr).
    #[serde(default)]
    oracle_rel_tol: Option<f64>,
    #[serde(default)]
    trend: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepPdeParams {
    problem: PdeSpec,
    two_scale: TwoScaleSpec,
    #[serde(default = "ladder")]
    epsilons: Vec<f64>,
    #[serde(default = "thousand")]
    n_paths: usize,
    #[serde(default = "origin_probe")]
    probes: Vec<ProbePoint>,
    #[serde(default)]
    initial_state: usize,
    #[serde(default = "jump_cap")]
    jump_cap: f64,
    #[serde(default)]
    checks: PdeSweepChecks,
}

fn origin_probe() -> Vec<ProbePoint> {
    vec![ProbePoint::new(0.0, 0.0)]
}

impl SweepPdeParams {
    fn options(&self, seed: u64, record: bool) -> PdeSweepOptions {
        PdeSweepOptions {
            epsilons: self.epsilons.clone(),
            n_paths: self.n_paths,
            probes: self.probes.clone(),
            initial_state: self.initial_state,
            seed,
            jump_cap: self.jump_cap,
            record_chains: record,
        }
    }

    fn check(&self) -> Result<()> {
        let problem = self.problem.build()?;
        let ts = self.two_scale.build()?;
        ensure(problem.reaction().gradient_free(), "sweep-pde needs a gradient-free reaction")?;
        if let Some(n) = self.problem.reaction.n_states() {
            ensure(n >= ts.dim(), format!("reaction knows {n} states, chain has {}", ts.dim()))?;
        }
        ensure(self.initial_state < ts.dim(), "initial_state out of range")?;
        crate::pde::check_probes(&problem, &self.probes)?;
        ensure(
            !self.epsilons.is_empty() && self.epsilons.iter().all(|&e| e > 0.0) && self.epsilons.windows(2).all(|w| w[1] < w[0]),
            "epsilons must be positive and strictly decreasing",
        )?;
        ensure(self.n_paths >= 2, "n_paths must be at least 2")?;
        if self.checks.oracle_rel_tol.is_some() {
            check_closed_form(&self.problem, &ClosedForm::IntegratingFactor { max_rel_error: 0.0 })?;
        }
        Ok(())
    }

    fn run(&self, seed: u64, dir: &Path) -> Result<Outcome> {
        let problem = self.problem.build()?;
        let ts = self.two_scale.build()?;
        let record = self.checks.oracle_rel_tol.is_some();
        let report = pde_homogenization_sweep(&problem, &ts, &self.options(seed, record))?;
        report.write_csv(csv_out(dir, "sweep.csv")?, false)?;
        let k = report.k;
        let mut w = csv::Writer::from_writer(csv_out(dir, "u_samples.csv")?);
        w.write_record(["ensemble", "epsilon", "path_id", "probe", "component", "value"])?;
        for (s, col) in report.limit_samples.iter().enumerate() {
            for (p, v) in col.iter().enumerate() {
                w.write_record(["limit".to_string(), String::new(), p.to_string(), (s / k).to_string(), (s % k).to_string(), fmt(*v)])?;
            }
        }
        for r in &report.rungs {
            for (s, col) in r.samples.iter().enumerate() {
                for (p, v) in col.iter().enumerate() {
                    w.write_record([
                        "epsilon".to_string(),
                        fmt(r.epsilon),
                        p.to_string(),
                        (s / k).to_string(),
                        (s % k).to_string(),
                        fmt(*v),
                    ])?;
                }
            }
        }
        w.flush()?;

        let rungs: Vec<Value> = report
            .rungs
            .iter()
            .map(|r| {
                json!({
                    "epsilon": r.epsilon,
                    "ks": r.ks,
                    "wasserstein": r.wasserstein,
                    "sup_u2": r.sup_u2,
                    "int_grad2": r.int_grad2,
                    "mean_jumps": r.mean_jumps,
                    "seconds": r.seconds,
                })
            })
            .collect();
        let mut results = json!({
            "epsilons": report.epsilons,
            "n_paths": report.n_paths,
            "probes": report.probes,
            "ks_noise_floor": report.ks_noise_floor,
            "trend_ok": report.trend_ok,
            "limit_seconds": report.limit_seconds,
            "rungs": rungs,
        });
        let mut verdicts = Vec::new();
        if self.checks.trend.unwrap_or(true) {
            verdicts.push(("ks_trend".to_string(), report.trend_ok));
        }
        let (first, last) = (&report.rungs[0], &report.rungs[report.rungs.len() - 1]);
        if let Some(max) = self.checks.ks_ratio_max {
            let ratios: Vec<f64> = first.ks.iter().zip(&last.ks).map(|(a, b)| b / a).collect();
            verdicts.push(("ks_ratio".to_string(), ratios.iter().all(|r| *r < max)));
            results["ks_ratios"] = json!(ratios);
        }
        if let (Some(tol), FunctionSpec::Linear { coeffs }) = (self.checks.oracle_rel_tol, &self.problem.reaction) {
            let form = ClosedForm::IntegratingFactor { max_rel_error: tol };
            let mut worst: f64 = 0.0;
            for r in &report.rungs {
                for (p, chain) in r.chains.iter().enumerate() {
                    for (pi, probe) in report.probes.iter().enumerate() {
                        let exact = closed_form_value(&self.problem, &form, chain, probe.t, probe.x);
                        worst = worst.max((r.samples[pi * k][p] / exact - 1.0).abs());
                    }
                }
            }
            let cbar = averaged_constants(&ts, coeffs);
            let limit_spec = PdeSpec {
                reaction: FunctionSpec::Linear { coeffs: cbar },
                ..self.problem.clone()
            };
            for (p, chain) in report.limit_chains.iter().enumerate() {
                for (pi, probe) in report.probes.iter().enumerate() {
                    let exact = closed_form_value(&limit_spec, &form, chain, probe.t, probe.x);
                    worst = worst.max((report.limit_samples[pi * k][p] / exact - 1.0).abs());
                }
            }
            results["oracle_max_rel_error"] = json!(worst);
            verdicts.push(("integrating_factor_oracle".to_string(), worst <= tol));
        }
        Ok(Outcome { verdicts, results })
    }
}
