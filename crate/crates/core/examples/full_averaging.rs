//! Full averaging: one fast block covering every state.
//!
//! With Q^ε = Q̃/ε and Q̃ irreducible, the limit chain has a single state and
//! the limit BSDE with deterministic ξ is the ODE y' = −Σ ν_i f(t, y, i).
//! Here f(t, y, i) = c_i y and ξ ≡ 1, so Y_0^ε = exp(∫ c(α^ε)) up to the time
//! step, and the sample law of Y_0^ε collapses onto exp(Σ ν_i c_i).
//!
//! ```bash
//! cargo run --release --example full_averaging
//! ```

use regime_bsde::bsde::{Driver, TerminalCondition};
use regime_bsde::homogenization::{averaged_ode_value, build_averaged_driver, epsilon_sweep, SweepOptions};
use regime_bsde::markov_chain::{GeneratorMatrix, StatePartition, TwoScaleGenerator};
use regime_bsde::stats::Estimate;

fn main() -> regime_bsde::error::Result<()> {
    let fast = GeneratorMatrix::from_rows(&[vec![-3.0, 2.0, 1.0], vec![1.0, -2.0, 1.0], vec![2.0, 2.0, -4.0]])?;
    let ts = TwoScaleGenerator::new(fast, GeneratorMatrix::zeros(3), 0.1, StatePartition::single_block(3))?;
    let nu = ts.quasi_stationary()[0].nu().to_vec();
    let f = Driver::linear(vec![0.6, -0.4, 0.2]);
    let avg = build_averaged_driver(&f, ts.partition(), ts.quasi_stationary())?;
    let ode = averaged_ode_value(&avg, 0, &[1.0], 0.0, 1.0, 1000)[0];
    println!("nu = {nu:.5?}; limit y(0) = {ode:.6}");

    let opts = SweepOptions {
        n_paths: 2000,
        steps: 200,
        seed: 31,
        ..Default::default()
    };
    let report = epsilon_sweep(&ts, &f, &TerminalCondition::constant(vec![1.0]), &opts)?;
    println!("{:>8} {:>10} {:>10} {:>10}", "epsilon", "mean Y0", "rel. err", "std Y0");
    for r in &report.rungs {
        let e = Estimate::from_samples(&r.y0[0]);
        println!(
            "{:>8} {:>10.6} {:>10.2e} {:>10.5}",
            r.epsilon,
            e.mean,
            (e.mean - ode).abs() / ode,
            e.std_dev()
        );
    }
    Ok(())
}
