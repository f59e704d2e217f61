//! Mean-square deviation of the occupation measure from its averaged
//! counterpart,
//!
//! ```text
//! E( ∫_0^T (1{α^ε_t = s_kj} − ν^k_j 1{ᾱ^ε_t = k}) β(t) dt )²  = O(ε),
//! ```
//!
//! estimated over an ε ladder with β ≡ 1; the log-log slope should be
//! close to 1 for the members of the fast block and the singleton block
//! contributes exactly zero.
//!
//! ```bash
//! cargo run --release --example occupation_rate
//! ```

use regime_bsde::markov_chain::{occupation_rate, GeneratorMatrix, OccupationOptions, StatePartition, TwoScaleGenerator};

fn main() -> regime_bsde::error::Result<()> {
    let fast = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0, 0.0], vec![2.0, -2.0, 0.0], vec![0.0, 0.0, 0.0]])?;
    let slow = GeneratorMatrix::from_rows(&[vec![-2.0, 0.0, 2.0], vec![1.0, -2.0, 1.0], vec![1.0, 2.0, -3.0]])?;
    let ts = TwoScaleGenerator::new(fast, slow, 0.05, StatePartition::new(vec![vec![0, 1], vec![2]])?)?;
    let opts = OccupationOptions {
        n_paths: 2000,
        seed: 11,
        ..Default::default()
    };
    let report = occupation_rate(&ts, |_| 1.0, &[0.2, 0.1, 0.05, 0.025], &opts, 0.8)?;
    for rung in &report.rungs {
        let line: Vec<String> = rung
            .entries
            .iter()
            .map(|e| format!("s{}: {:.5} ± {:.5}", e.state + 1, e.estimate.mean, e.estimate.se))
            .collect();
        println!("eps = {:<6} {}", rung.epsilon, line.join("   "));
    }
    for s in &report.slopes {
        match s.slope {
            Some(v) => println!("slope for s{} (block {}): {v:.3}", s.state + 1, s.block + 1),
            None => println!("s{} (block {}): identically zero", s.state + 1, s.block + 1),
        }
    }
    println!("pass (slope >= 0.8): {}", report.pass);
    Ok(())
}
