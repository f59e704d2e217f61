use regime_bsde::bsde::{BrownianEnsemble, TimeGrid};
use regime_bsde::error::Error;
use regime_bsde::lq_control::{
    evaluate_cost, optimality_report, sample_regime_paths, solve_optimal, verify_optimality, FeedbackLaw, LqProblem,
    LqRegime, OptimalityOptions, ZeroControl,
};
use regime_bsde::markov_chain::GeneratorMatrix;

fn tanh_problem() -> LqProblem {
    LqProblem {
        regimes: vec![LqRegime::scalar(0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0)],
        generator: GeneratorMatrix::zeros(1),
        horizon: 1.0,
        x0: vec![1.0],
        initial_regime: 0,
    }
}

fn two_regimes() -> LqProblem {
    LqProblem {
        regimes: vec![
            LqRegime::scalar(0.2, 1.0, 0.3, 0.1, 1.0, 1.0, 0.5),
            LqRegime::scalar(0.2, 1.0, 0.3, 0.1, 4.0, 1.0, 0.5),
        ],
        generator: GeneratorMatrix::from_rows(&[vec![-1.0, 1.0], vec![2.0, -2.0]]).unwrap(),
        horizon: 1.0,
        x0: vec![1.0],
        initial_regime: 0,
    }
}

#[test]
fn scalar_riccati_is_tanh() {
    let fb = solve_optimal(&tanh_problem()).unwrap();
    for t in [0.0, 0.25, 0.5, 0.9, 1.0] {
        assert!((fb.p_at(t, 0)[(0, 0)] - (1.0 - t).tanh()).abs() < 1e-6, "t = {t}");
    }
}

#[test]
fn coupled_riccati_is_psd_and_ordered() {
    let fb = solve_optimal(&two_regimes()).unwrap();
    let (min_eig, asym) = fb.psd_check();
    assert!(min_eig >= 0.0 && asym == 0.0);
    // the regime with the heavier state weight costs more
    assert!(fb.p_at(0.0, 1)[(0, 0)] > fb.p_at(0.0, 0)[(0, 0)]);
}

#[test]
fn simulated_cost_matches_value_formula() {
    let problem = two_regimes();
    let fb = solve_optimal(&problem).unwrap();
    let grid = TimeGrid::uniform(0.0, 1.0, 400).unwrap();
    let bm = BrownianEnsemble::sample(&grid, 1, 4000, 6).unwrap();
    let chains = sample_regime_paths(&problem, bm.n_paths(), 6);
    let j = evaluate_cost(&problem, &FeedbackLaw::new(&fb, &grid), &chains, &bm).unwrap();
    let idle = evaluate_cost(&problem, &ZeroControl, &chains, &bm).unwrap();
    assert!((j.mean - fb.value()).abs() < 4.0 * j.se + 0.01 * fb.value(), "J = {} ± {}, value {}", j.mean, j.se, fb.value());
    assert!(idle.mean > j.mean);
}

#[test]
fn scaled_feedback_is_rejected() {
    let problem = tanh_problem();
    let fb = solve_optimal(&problem).unwrap();
    let grid = TimeGrid::uniform(0.0, 1.0, 200).unwrap();
    let bm = BrownianEnsemble::sample(&grid, 1, 100, 5).unwrap();
    let chains = sample_regime_paths(&problem, bm.n_paths(), 5);
    let opts = OptimalityOptions {
        n_perturbations: 30,
        ..Default::default()
    };
    assert!(optimality_report(&problem, &fb, &opts, &chains, &bm).unwrap().pass);
    let wrong = verify_optimality(&problem, &fb.scaled(1.5), &opts, &chains, &bm);
    assert!(matches!(wrong, Err(Error::OptimalityViolation(_))));
}

#[test]
fn indefinite_control_weight_is_invalid() {
    let mut problem = tanh_problem();
    problem.regimes[0] = LqRegime::scalar(0.0, 1.0, 0.0, 0.0, 1.0, -1.0, 0.0);
    assert!(matches!(problem.validate(), Err(Error::InvalidProblem(_))));
}
