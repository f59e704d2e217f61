//! Regime-switching LQ control: Riccati feedback and its certification.
//!
//! Scalar problem dx = v dt, cost ½∫(x² + v²) dt, whose Riccati solution is
//! P(t) = tanh(T − t). The feedback is certified by perturbation dominance,
//! the first-order identity and the convexity gap; scaling P by 1.5 gives a
//! wrong feedback that the dominance check rejects. A two-regime problem
//! shows the coupled system.
//!
//! ```bash
//! cargo run --release --example lq_optimality
//! ```

use regime_bsde::bsde::{BrownianEnsemble, TimeGrid};
use regime_bsde::lq_control::{
    evaluate_cost, optimality_report, sample_regime_paths, solve_optimal, FeedbackLaw, LqProblem, LqRegime,
    OptimalityOptions,
};
use regime_bsde::markov_chain::GeneratorMatrix;

fn main() -> regime_bsde::error::Result<()> {
    let problem = LqProblem {
        regimes: vec![LqRegime::scalar(0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0)],
        generator: GeneratorMatrix::zeros(1),
        horizon: 1.0,
        x0: vec![1.0],
        initial_regime: 0,
    };
    let fb = solve_optimal(&problem)?;
    let p0 = fb.p_at(0.0, 0)[(0, 0)];
    println!("P(0) = {p0:.10}, tanh(1) = {:.10}, error {:.2e}", 1f64.tanh(), (p0 - 1f64.tanh()).abs());

    let grid = TimeGrid::uniform(0.0, 1.0, 400)?;
    let bm = BrownianEnsemble::sample(&grid, 1, 200, 5)?;
    let chains = sample_regime_paths(&problem, bm.n_paths(), 5);
    let opts = OptimalityOptions::default();
    let report = optimality_report(&problem, &fb, &opts, &chains, &bm)?;
    println!("optimal feedback:  {} -> pass = {}", report.summary(), report.pass);
    let wrong = fb.scaled(1.5);
    let bad = optimality_report(&problem, &wrong, &opts, &chains, &bm)?;
    println!("P scaled by 1.5:   {} -> pass = {}", bad.summary(), bad.pass);

    // two regimes differing in the state weight, with noise
    let two = LqProblem {
        regimes: vec![
            LqRegime::scalar(0.2, 1.0, 0.3, 0.1, 1.0, 1.0, 0.5),
            LqRegime::scalar(0.2, 1.0, 0.3, 0.1, 4.0, 1.0, 0.5),
        ],
        generator: GeneratorMatrix::from_rows(&[vec![-1.0, 1.0], vec![2.0, -2.0]])?,
        horizon: 1.0,
        x0: vec![1.0],
        initial_regime: 0,
    };
    let fb2 = solve_optimal(&two)?;
    let bm2 = BrownianEnsemble::sample(&grid, 1, 4000, 6)?;
    let chains2 = sample_regime_paths(&two, bm2.n_paths(), 6);
    let j = evaluate_cost(&two, &FeedbackLaw::new(&fb2, &grid), &chains2, &bm2)?;
    println!(
        "two regimes: P_1(0) = {:.5}, P_2(0) = {:.5}, J(u*) = {:.5} ± {:.5}, ½x0'P(0)x0 = {:.5}",
        fb2.p_at(0.0, 0)[(0, 0)],
        fb2.p_at(0.0, 1)[(0, 0)],
        j.mean,
        j.se,
        fb2.value()
    );
    let r2 = optimality_report(&two, &fb2, &OptimalityOptions { n_perturbations: 20, ..Default::default() }, &chains2, &bm2)?;
    println!("two regimes certification: {} -> pass = {}", r2.summary(), r2.pass);
    Ok(())
}
