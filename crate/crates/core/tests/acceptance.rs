//! Acceptance suite: every criterion runs at its stated tolerance through the
//! bundled configs (or the library directly, where the budget is below what
//! process start-up allows) and prints one pass/fail line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use regime_bsde::experiment::{run, ExperimentConfig, RunReport};
use regime_bsde::markov_chain::{
    aggregate_generator, compose, quasi_stationary, GeneratorMatrix, QuasiStationaryDistribution, StatePartition,
    TwoScaleGenerator,
};
use serde_json::Value;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.json"))
}

fn run_config(name: &str, out: &Path) -> (RunReport, Duration) {
    let cfg = ExperimentConfig::from_file(&config_path(name)).expect("config parses");
    let started = Instant::now();
    let report = run(&cfg, None, Some(out)).expect("experiment runs");
    (report, started.elapsed())
}

fn run_fresh(name: &str) -> (RunReport, Duration) {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(name, dir.path());
    (out.0, out.1)
}

fn verdict(report: &RunReport, name: &str) -> bool {
    report
        .outcome
        .verdicts
        .iter()
        .find(|(n, _)| n == name)
        .unwrap_or_else(|| panic!("no verdict `{name}` in {:?}", report.outcome.verdicts))
        .1
}

fn result<'a>(report: &'a RunReport, path: &str) -> &'a Value {
    report.outcome.results.pointer(path).unwrap_or(&Value::Null)
}

fn report_line(n: usize, title: &str, pass: bool, detail: String) {
    println!("criterion {n:>2} {:<4} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} ({title}) failed: {detail}");
}

fn three_state_chain() -> (GeneratorMatrix, GeneratorMatrix, StatePartition) {
    let fast = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0, 0.0], vec![2.0, -2.0, 0.0], vec![0.0, 0.0, 0.0]]).unwrap();
    let slow = GeneratorMatrix::from_rows(&[vec![-2.0, 0.0, 2.0], vec![1.0, -2.0, 1.0], vec![1.0, 2.0, -3.0]]).unwrap();
    let partition = StatePartition::new(vec![vec![0, 1], vec![2]]).unwrap();
    (fast, slow, partition)
}

fn max_abs(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn criterion_01_three_state_aggregation() {
    let (fast, slow, partition) = three_state_chain();
    let block = fast.restrict(&[0, 1]).unwrap();
    let started = Instant::now();
    let nu = quasi_stationary(&block).unwrap();
    let nus = vec![nu.clone(), QuasiStationaryDistribution::point_mass()];
    let qbar = aggregate_generator(&slow, &partition, &nus).unwrap();
    let elapsed = started.elapsed();
    let nu_err = (nu.nu()[0] - 2.0 / 3.0).abs().max((nu.nu()[1] - 1.0 / 3.0).abs());
    let q_err = max_abs(&qbar.to_rows(), &[vec![-5.0 / 3.0, 5.0 / 3.0], vec![3.0, -3.0]]);
    let (cli, _) = run_fresh("example_3_2_aggregate");
    let pass = nu_err <= 1e-12
        && q_err <= 1e-12
        && elapsed < Duration::from_millis(1)
        && verdict(&cli, "quasi_stationary_matches")
        && verdict(&cli, "aggregated_matches");
    report_line(
        1,
        "three-state aggregation",
        pass,
        format!("|nu - (2/3, 1/3)| = {nu_err:.1e}, |Qbar - exact| = {q_err:.1e}, {elapsed:?} (< 1 ms)"),
    );
}

#[test]
fn criterion_02_three_state_composition() {
    let (fast, slow, partition) = three_state_chain();
    let ts = TwoScaleGenerator::new(fast, slow, 0.05, partition).unwrap();
    let started = Instant::now();
    let q = compose(&ts);
    let elapsed = started.elapsed();
    let want = [vec![-22.0, 20.0, 2.0], vec![41.0, -42.0, 1.0], vec![1.0, 2.0, -3.0]];
    let err = max_abs(&q.to_rows(), &want);
    let (cli, _) = run_fresh("example_3_2_aggregate");
    let pass = err <= 1e-12 && elapsed < Duration::from_millis(1) && verdict(&cli, "composed_matches");
    report_line(2, "three-state composition", pass, format!("|Q - exact| = {err:.1e}, {elapsed:?} (< 1 ms)"));
}

#[test]
fn criterion_03_occupation_rate() {
    let (r, t) = run_fresh("example_3_2_occupation_rate");
    let slopes: Vec<f64> = result(&r, "/occupation_rate/slopes")
        .as_array()
        .map(|a| a.iter().filter_map(|s| s["slope"].as_f64()).collect())
        .unwrap_or_default();
    let min = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = verdict(&r, "occupation_rate") && !slopes.is_empty() && min >= 0.8 && t < Duration::from_secs(120);
    report_line(3, "occupation-measure rate", pass, format!("min log-log slope {min:.3} (>= 0.8) over {} pairs, {t:.2?}", slopes.len()));
}

#[test]
fn criterion_04_bsde_closed_forms() {
    let (a, ta) = run_fresh("bsde_linear_growth");
    let (b, tb) = run_fresh("bsde_occupation_driver");
    let (c, tc) = run_fresh("bsde_brownian_terminal");
    let ea = result(&a, "/chains/0/y0_rel_error").as_f64().unwrap_or(f64::NAN);
    let eb = result(&b, "/chains")
        .as_array()
        .map(|v| v.iter().filter_map(|c| c["oracle_rel_error"].as_f64()).fold(0.0, f64::max))
        .unwrap_or(f64::NAN);
    let ec = result(&c, "/chains/0/z_rms_rel_error").as_f64().unwrap_or(f64::NAN);
    let total = ta + tb + tc;
    let pass = verdict(&a, "y0")
        && verdict(&b, "path_oracle")
        && verdict(&c, "z_reference")
        && ea < 0.02
        && eb < 0.02
        && ec < 0.05
        && total < Duration::from_secs(120);
    report_line(
        4,
        "BSDE closed forms",
        pass,
        format!("(a) |Y0 - e|/e = {ea:.2e}, (b) worst path {eb:.1e}, (c) Z RMS {ec:.2e}, {total:.2?}"),
    );
}

#[test]
fn criterion_05_picard_contraction() {
    let (r, t) = run_fresh("picard_linear");
    let iters = result(&r, "/contraction/iterations").as_u64().unwrap_or(u64::MAX);
    let beta = result(&r, "/contraction/beta").as_f64().unwrap_or(f64::NAN);
    let max_ratio = result(&r, "/max_ratio").as_f64().unwrap_or(f64::NAN);
    let pass = verdict(&r, "converged")
        && verdict(&r, "contracting")
        && verdict(&r, "iteration_count")
        && (beta - 5.0).abs() < 1e-12
        && iters <= 15
        && t < Duration::from_secs(60);
    report_line(5, "Picard contraction", pass, format!("beta = {beta}, {iters} iterations, max D ratio {max_ratio:.3}, {t:.2?}"));
}

#[test]
fn criterion_06_lq_optimality() {
    let (r, t) = run_fresh("lq_tanh");
    let err = result(&r, "/p0_max_abs_error").as_f64().unwrap_or(f64::NAN);
    let summary = result(&r, "/optimality/summary").as_str().unwrap_or("").to_string();
    let pass = verdict(&r, "p0_matches")
        && err <= 1e-4
        && verdict(&r, "dominance")
        && verdict(&r, "stationarity")
        && verdict(&r, "negative_control_rejected")
        && t < Duration::from_secs(120);
    report_line(6, "LQ optimality", pass, format!("|P(0) - tanh 1| = {err:.1e}; {summary}; scaled P rejected; {t:.2?}"));
}

#[test]
fn criterion_07_bsde_homogenization() {
    let (r, t) = run_fresh("example_3_2_sweep_bsde");
    let ratio = result(&r, "/ks_ratios/0").as_f64().unwrap_or(f64::NAN);
    let oracle = result(&r, "/limit_oracle_max_abs_error").as_f64().unwrap_or(f64::NAN);
    let pass = verdict(&r, "ks_ratio") && ratio < 0.5 && verdict(&r, "limit_oracle") && oracle <= 1e-10 && t < Duration::from_secs(300);
    report_line(
        7,
        "BSDE homogenization",
        pass,
        format!("KS(0.0125)/KS(0.2) = {ratio:.3} (< 0.5), limit oracle {oracle:.1e}, {t:.2?}"),
    );
}

#[test]
fn criterion_08_full_averaging() {
    let (r, t) = run_fresh("example_3_1_averaging");
    let rel = result(&r, "/ode_mean_rel_error").as_f64().unwrap_or(f64::NAN);
    let red = result(&r, "/std_reduction").as_f64().unwrap_or(f64::NAN);
    let pass = verdict(&r, "ode_mean") && rel <= 0.01 && verdict(&r, "std_reduction") && red >= 2.0 && t < Duration::from_secs(180);
    report_line(8, "full averaging", pass, format!("mean vs ODE {rel:.2e} (<= 1%), sd reduced {red:.2}x (>= 2), {t:.2?}"));
}

#[test]
fn criterion_09_feynman_kac() {
    let (heat, th) = run_fresh("fk_heat");
    let (lin, tl) = run_fresh("fk_linear_reaction");
    let mut pass = th + tl < Duration::from_secs(180);
    let mut parts = Vec::new();
    for (name, r) in [("heat", &heat), ("linear", &lin)] {
        let n = result(r, "/feynman_kac/probes").as_array().map_or(0, Vec::len);
        pass &= n == 5 && verdict(r, "feynman_kac") && verdict(r, "gradient_identity");
        let worst = result(r, "/feynman_kac/probes")
            .as_array()
            .map(|v| {
                v.iter()
                    .map(|p| p["discrepancy"].as_f64().unwrap_or(f64::NAN) / p["allowance"].as_f64().unwrap_or(f64::NAN))
                    .fold(0.0, f64::max)
            })
            .unwrap_or(f64::NAN);
        parts.push(format!("{name}: {n} probes, worst |d|/allowance {worst:.2}"));
    }
    report_line(9, "Feynman-Kac", pass, format!("{}, gradient identity ok, {:.2?}", parts.join("; "), th + tl));
}

#[test]
fn criterion_10_pde_homogenization() {
    let (r, t) = run_fresh("example_3_2_sweep_pde");
    let ratios: Vec<f64> = result(&r, "/ks_ratios")
        .as_array()
        .map(|a| a.iter().filter_map(Value::as_f64).collect())
        .unwrap_or_default();
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    let oracle = result(&r, "/oracle_max_rel_error").as_f64().unwrap_or(f64::NAN);
    let pass = verdict(&r, "ks_ratio")
        && !ratios.is_empty()
        && worst < 0.5
        && verdict(&r, "integrating_factor_oracle")
        && oracle <= 1e-8
        && t < Duration::from_secs(300);
    report_line(
        10,
        "PDE homogenization",
        pass,
        format!("worst per-probe KS ratio {worst:.3} over {} probes, oracle {oracle:.1e}, {t:.2?}", ratios.len()),
    );
}

#[test]
fn criterion_11_uniform_a_priori_bound() {
    let (r, _) = run_fresh("example_3_2_sweep_bsde");
    let ratio = result(&r, "/a_priori_bound/ratio").as_f64().unwrap_or(f64::NAN);
    let pass = verdict(&r, "a_priori_bound") && ratio <= 1.5;
    report_line(11, "uniform a priori bound", pass, format!("max/min of E(sup|Y|^2 + int|Z|^2) = {ratio:.3} (<= 1.5)"));
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension().is_some_and(|x| x == "csv"))
                .then(|| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        })
        .collect()
}

#[test]
fn criterion_12_determinism() {
    let names = [
        "example_3_2_aggregate",
        "example_3_2_occupation_rate",
        "bsde_linear_growth",
        "bsde_occupation_driver",
        "bsde_brownian_terminal",
        "picard_linear",
        "lq_tanh",
        "example_3_2_sweep_bsde",
        "example_3_1_averaging",
        "fk_heat",
        "fk_linear_reaction",
        "example_3_2_sweep_pde",
    ];
    let mut differing = Vec::new();
    let mut files = 0;
    for name in names {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_config(name, a.path());
        run_config(name, b.path());
        let (fa, fb) = (csv_files(a.path()), csv_files(b.path()));
        files += fa.len();
        if fa.is_empty() || fa != fb {
            differing.push(name);
        }
    }
    report_line(
        12,
        "determinism",
        differing.is_empty(),
        format!("{} configs rerun, {files} CSV files compared byte for byte, differing: {differing:?}", names.len()),
    );
}
