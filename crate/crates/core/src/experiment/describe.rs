//! Human-readable parameter schemas, printed by `regime-bsde describe`.

use crate::error::{Error, Result};

const COMMON: &str = "\
Top-level fields (all kinds):
  kind         string   one of the experiment kinds
  seed         integer  master seed (default 0; --seed overrides)
  output_dir   string   output directory (default out/<kind>; --out overrides)
  description  string   free text, copied into summary.json
  params       object   kind-specific, see below; unknown fields are rejected
";

const TWO_SCALE: &str = "\
  two_scale.fast       fast generator Q̃ on all states, block-diagonal over the partition
  two_scale.slow       full generator on all states (slow motion)
  two_scale.partition  list of blocks, each a list of state indices
  two_scale.epsilon    time-scale ratio (default 0.05)
";

const FUNCTIONS: &str = "\
Functions (tag \"type\"):
  driver/reaction: {zero, k=1} | {state_constant, values[state]}
                 | {linear, coeffs[state]}            f = c(α) y
                 | {affine, constant[state][k], linear_y[state][k][k], linear_z?[state][k][k]}
  terminal:        {constant, values[k]} | {polynomial, coeffs} (ascending powers of x)
                 | {gaussian, variance, amplitude=1}     h = A·exp(−x²/(2v))
  chain:           {constant, state} | {sampled, generator, initial_state, count=1}
                 | {explicit, initial_state, jump_times, states}
  forward:         {brownian} | {diffusion, x0, drift=[0], sigma=[1]} (polynomials in x)
";

const AGGREGATE: &str = "\
aggregate: quasi-stationary laws, aggregated and composed generators.
params:
  two_scale        (see below)
  expected?        {quasi_stationary?, aggregated?, composed?, tol=1e-12}
outputs: aggregated_generator.csv, composed_generator.csv, quasi_stationary.csv
verdicts: invariants, <name>_matches for each expected matrix
";

const SIMULATE_CHAIN: &str = "\
simulate-chain: sample chain paths; optionally the occupation-measure rate.
params:
  generator | two_scale   exactly one
  initial_state=0, horizon=1.0 (time units), n_paths=100
  occupation_rate?  {epsilons=[0.2, 0.1, 0.05, 0.025], n_paths=2000,
                     min_slope=0.8, beta=[1] (polynomial in t), start=0.0}
outputs: chain_paths.csv, occupation_rate.csv
verdicts: occupation_rate (log-log slope of the RMS deviation >= min_slope)
";

const SOLVE_BSDE: &str = "\
solve-bsde: regression (or nested) Monte Carlo solution along each chain path.
params:
  driver, terminal, forward={brownian}, chain={constant, state: 0}
  horizon=1.0, steps=100, n_paths=1000, brownian_dim=1
  method=regression|nested, nested_inner=200, csv_paths=100
  checks: {y0?: {value, rel_tol}, path_oracle_rel_tol?, z_reference?: {value, rel_tol},
           martingale=false}
outputs: bsde_solution.csv, y0_by_chain.csv
";

const PICARD: &str = "\
picard: Picard iteration in the β-weighted norm.
params: as solve-bsde (single chain path) plus
  beta? (default 2μ + 2μ² + 1, μ the Lipschitz constant), max_iters=50, tol=1e-8
  checks: {max_iterations?, contraction=true}
outputs: picard_differences.csv
verdicts: converged, contracting, iteration_count
";

const LQ: &str = "\
lq: Markov-jump LQ control via coupled Riccati equations, certified by perturbation.
params:
  regimes      list of {a, b, c[j], d[j], r, n, q_term}; entries are numbers or
               polynomial coefficient lists in t
  generator    regime generator rows
  horizon=1.0, x0, initial_regime=0
  riccati_steps=2000, n_paths=200, sim_steps=400
  optimality   {n_perturbations=100, deltas=[0.5, 1.0], pieces=4, z_score=3,
                convexity_rel_tol=0.05}
  negative_control_scale?   certify P scaled by this factor, must be rejected
  checks       {expected_p0?[regime][row][col], p0_tol=1e-4}
outputs: riccati.csv, perturbations.csv, negative_control.csv
";

const SWEEP_BSDE: &str = "\
sweep-bsde: ε-sweep of Y_0 against the averaged (limit) BSDE.
params:
  two_scale, driver (z-independent), terminal
  epsilons=[0.2, 0.1, 0.05, 0.025, 0.0125], n_paths=1000, n_brownian=1
  steps=100, horizon=1.0, initial_state=0, jump_cap=1e6 (mean jumps per path)
  checks: {ks_ratio_max?, a_priori_ratio_max?, limit_oracle_tol?, ode_mean_rel_tol?,
           std_reduction_min?, trend=true}
outputs: sweep.csv, y0_samples.csv
";

const PDE: &str = "\
pde: Strang-split Crank–Nicolson solve of the regime-switching parabolic system.
params:
  problem  {grid: {horizon, x_lo, x_hi, nx, nt}, drift=[0], sigma=[1] (polynomials in x),
            terminal, reaction}
  chain={constant, state: 0}, write_field=true
  checks: {closed_form?: {heat_gaussian, max_abs_error} | {integrating_factor, max_rel_error}}
outputs: pde_solution.csv
";

const FK_CHECK: &str = "\
fk-check: compare the PDE field with independent BSDE estimates at probe points.
params:
  problem (as pde), chain (one path), probes [{t, x}]
  n_mc=10000, batches=10, steps=100, rel_tol=0.02, grad_rel_tol=0.1, z_score=3
  gradient=true, negative_control_scale?
outputs: fk_probes.csv
verdicts: feynman_kac, gradient_identity, negative_control_rejected
";

const SWEEP_PDE: &str = "\
sweep-pde: ε-sweep of u(t, x) at probes against the averaged PDE.
params:
  problem (gradient-free reaction), two_scale
  epsilons=[0.2, 0.1, 0.05, 0.025, 0.0125], n_paths=1000, probes=[{t: 0, x: 0}]
  initial_state=0, jump_cap=1e6 (mean jumps per path)
  checks: {ks_ratio_max?, oracle_rel_tol?, trend=true}
outputs: sweep.csv, u_samples.csv
";

/// Schema text for `kind`, with defaults and units.
pub fn describe(kind: &str) -> Result<String> {
    let (body, extra) = match kind {
        "aggregate" => (AGGREGATE, TWO_SCALE),
        "simulate-chain" => (SIMULATE_CHAIN, TWO_SCALE),
        "solve-bsde" => (SOLVE_BSDE, FUNCTIONS),
        "picard" => (PICARD, FUNCTIONS),
        "lq" => (LQ, ""),
        "sweep-bsde" => (SWEEP_BSDE, TWO_SCALE),
        "pde" => (PDE, FUNCTIONS),
        "fk-check" => (FK_CHECK, FUNCTIONS),
        "sweep-pde" => (SWEEP_PDE, TWO_SCALE),
        other => return Err(Error::UnknownKind(other.to_string())),
    };
    let mut text = format!("{body}\n{COMMON}");
    if !extra.is_empty() {
        text.push('\n');
        text.push_str(extra);
    }
    if matches!(kind, "sweep-bsde" | "sweep-pde") {
        text.push('\n');
        text.push_str(FUNCTIONS);
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::KINDS;

    #[test]
    fn every_kind_is_described() {
        for k in KINDS {
            assert!(describe(k).unwrap().starts_with(k));
        }
        assert!(describe("sweep-bsde").unwrap().contains("0.2, 0.1, 0.05, 0.025, 0.0125"));
        assert!(matches!(describe("nope"), Err(Error::UnknownKind(_))));
    }
}
