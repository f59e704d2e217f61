//! ε-sweep of a regime-switching BSDE towards its averaged limit.
//!
//! Three-state chain with fast block {s1, s2} and slow state s3:
//!
//! ```text
//! Q̃ = diag([[-1, 1], [2, -2]], [0]),  Q̂ = [[-2, 0, 2], [1, -2, 1], [1, 2, -3]]
//! ```
//!
//! Driver f(t, y, i) = c_i with c = (1, −1, 0.5), ξ ≡ 0 and T = 1, so
//! Y_0^ε = ∫_0^T c(α^ε_s) ds. The limit uses the two-state chain generated by
//! Q̄ = [[-5/3, 5/3], [3, -3]] with f̄ = (1/3, 0.5). Prints the KS and
//! Wasserstein distances along the ladder and the uniform a priori bound.
//!
//! ```bash
//! cargo run --release --example homogenization_sweep
//! ```

use regime_bsde::bsde::{Driver, TerminalCondition};
use regime_bsde::homogenization::{epsilon_sweep, uniform_bound_check, SweepOptions};
use regime_bsde::markov_chain::{GeneratorMatrix, StatePartition, TwoScaleGenerator};

fn main() -> regime_bsde::error::Result<()> {
    let fast = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0, 0.0], vec![2.0, -2.0, 0.0], vec![0.0, 0.0, 0.0]])?;
    let slow = GeneratorMatrix::from_rows(&[vec![-2.0, 0.0, 2.0], vec![1.0, -2.0, 1.0], vec![1.0, 2.0, -3.0]])?;
    let partition = StatePartition::new(vec![vec![0, 1], vec![2]])?;
    let ts = TwoScaleGenerator::new(fast, slow, 0.05, partition)?;

    let opts = SweepOptions {
        n_paths: 4000,
        steps: 100,
        initial_state: 2,
        seed: 2024,
        ..Default::default()
    };
    let report = epsilon_sweep(
        &ts,
        &Driver::state_constant(vec![1.0, -1.0, 0.5]),
        &TerminalCondition::constant(vec![0.0]),
        &opts,
    )?;
    println!("KS noise floor (two samples of {}): {:.4}", opts.n_paths, report.ks_noise_floor);
    println!("{:>8} {:>8} {:>10} {:>10} {:>10} {:>8}", "epsilon", "KS", "W1", "E sup Y^2", "occ. TV", "jumps");
    for r in &report.rungs {
        println!(
            "{:>8} {:>8.4} {:>10.5} {:>10.5} {:>10.4} {:>8.1}",
            r.epsilon, r.ks[0], r.wasserstein[0], r.a_priori.mean, r.occupation_tv, r.mean_jumps
        );
    }
    let ks = report.ks_series(0);
    println!(
        "KS(smallest eps) / KS(largest eps) = {:.3}; trend verdict {}",
        ks[ks.len() - 1] / ks[0],
        report.trend_ok
    );
    let bound = uniform_bound_check(&report, 1.5);
    println!("a priori bound: max/min = {:.3} (pass = {})", bound.ratio, bound.pass);
    Ok(())
}
