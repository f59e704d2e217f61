use proptest::prelude::*;

use regime_bsde::bsde::{
    picard_solve, solve_backward, solve_fbsde, solve_nested, BrownianEnsemble, Driver, ForwardModel, PicardOptions,
    TerminalCondition, TimeGrid,
};
use regime_bsde::error::Error;
use regime_bsde::markov_chain::{simulate_chain, ChainPath, GeneratorMatrix};
use regime_bsde::rng::StreamKey;

fn ensemble(steps: usize, n: usize, seed: u64) -> BrownianEnsemble {
    BrownianEnsemble::sample(&TimeGrid::uniform(0.0, 1.0, steps).unwrap(), 1, n, seed).unwrap()
}

#[test]
fn zero_driver_constant_terminal_is_exact() {
    let bm = ensemble(20, 50, 1);
    let chain = ChainPath::constant(0, 0.0, 1.0);
    let sol = solve_backward(&Driver::zero(1, 1), &TerminalCondition::constant(vec![1.0]), &bm, &chain).unwrap();
    for p in 0..sol.n_paths() {
        for i in 0..sol.steps() {
            assert_eq!(sol.y(p, i)[0], 1.0);
            assert_eq!(sol.z(p, i)[0], 0.0);
        }
    }
}

#[test]
fn linear_driver_converges_at_first_order() {
    let chain = ChainPath::constant(0, 0.0, 1.0);
    let e = std::f64::consts::E;
    let err = |n: usize| {
        let sol = solve_backward(&Driver::linear(vec![1.0]), &TerminalCondition::constant(vec![1.0]), &ensemble(n, 10, 2), &chain)
            .unwrap();
        (sol.y(0, 0)[0] - e).abs()
    };
    let (e50, e100) = (err(50), err(100));
    assert!(e100 < e50 && (e50 / e100 - 2.0).abs() < 0.1, "errors {e50} {e100}");
}

#[test]
fn fbsde_with_brownian_forward_matches_backward_solver() {
    let bm = ensemble(40, 300, 3);
    let chain = ChainPath::constant(0, 0.0, 1.0);
    let f = Driver::linear(vec![0.5]);
    let xi = TerminalCondition::brownian_terminal();
    let a = solve_backward(&f, &xi, &bm, &chain).unwrap();
    let b = solve_fbsde(&f, &xi, &bm, &ForwardModel::Brownian, &chain).unwrap();
    assert_eq!(a.y0(0), b.y0(0));
}

#[test]
fn nested_and_regression_agree_on_smooth_terminal() {
    let bm = ensemble(4, 200, 4);
    let chain = ChainPath::constant(0, 0.0, 1.0);
    let f = Driver::linear(vec![0.3]);
    let xi = TerminalCondition::of_terminal(1, "x^2", |x, out| out[0] = x[0] * x[0]);
    let nested = solve_nested(&f, &xi, &bm, &chain, 20).unwrap();
    let reg = solve_backward(&f, &xi, &bm, &chain).unwrap();
    // E[B_1^2] e^{0.3} under both schemes, up to Monte Carlo error
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let (yn, yr) = (mean(nested.y0(0)), mean(reg.y0(0)));
    assert!((yn - yr).abs() < 0.1 * yr, "nested {yn} vs regression {yr}");
}

#[test]
fn step_larger_than_lipschitz_allows_is_rejected() {
    let bm = ensemble(2, 10, 5);
    let chain = ChainPath::constant(0, 0.0, 1.0);
    let err = solve_backward(&Driver::linear(vec![4.0]), &TerminalCondition::constant(vec![1.0]), &bm, &chain);
    assert!(matches!(err, Err(Error::StepTooLarge { .. })));
}

#[test]
fn picard_reaches_the_implicit_solution() {
    let bm = ensemble(100, 50, 6);
    let chain = ChainPath::constant(0, 0.0, 1.0);
    let f = Driver::linear(vec![1.0]);
    let xi = TerminalCondition::constant(vec![1.0]);
    let (sol, report) = picard_solve(&f, &xi, &bm, &chain, &PicardOptions::default()).unwrap();
    let implicit = solve_backward(&f, &xi, &bm, &chain).unwrap();
    assert!(report.converged && report.contracting());
    assert!((sol.y(0, 0)[0] - implicit.y(0, 0)[0]).abs() < 0.02);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn declared_lipschitz_constant_holds(c in prop::collection::vec(-3.0f64..3.0, 1..4), seed in any::<u64>()) {
        let f = Driver::linear(c.clone());
        let observed = f.observed_lipschitz(c.len(), 1.0, 200, seed);
        prop_assert!(observed <= f.lipschitz() * (1.0 + 1e-12));
    }

    #[test]
    fn occupation_driver_is_exact_on_any_path(
        c in prop::collection::vec(-2.0f64..2.0, 3),
        seed in any::<u64>(),
        steps in 5usize..40,
    ) {
        let q = GeneratorMatrix::from_rows(&[vec![-3.0, 2.0, 1.0], vec![1.0, -2.0, 1.0], vec![4.0, 1.0, -5.0]]).unwrap();
        let path = simulate_chain(&q, 0, 0.0, 1.0, &mut StreamKey::new(seed).label("bsde-prop").rng());
        let sol = solve_backward(&Driver::state_constant(c.clone()), &TerminalCondition::constant(vec![0.0]), &ensemble(steps, 5, seed), &path)
            .unwrap();
        let exact: f64 = path.occupation(0.0, 1.0, 3).iter().zip(&c).map(|(o, c)| o * c).sum();
        prop_assert!((sol.y(0, 0)[0] - exact).abs() < 1e-12);
    }
}
