use regime_bsde::bsde::{Driver, TerminalCondition};
use regime_bsde::homogenization::{averaged_ode_value, build_averaged_driver, epsilon_sweep, SweepOptions};
use regime_bsde::markov_chain::{GeneratorMatrix, StatePartition, TwoScaleGenerator};
use regime_bsde::stats::ks_statistic;

fn example() -> TwoScaleGenerator {
    let fast = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0, 0.0], vec![2.0, -2.0, 0.0], vec![0.0, 0.0, 0.0]]).unwrap();
    let slow = GeneratorMatrix::from_rows(&[vec![-2.0, 0.0, 2.0], vec![1.0, -2.0, 1.0], vec![1.0, 2.0, -3.0]]).unwrap();
    TwoScaleGenerator::new(fast, slow, 0.05, StatePartition::new(vec![vec![0, 1], vec![2]]).unwrap()).unwrap()
}

#[test]
fn averaged_driver_weights_by_quasi_stationary_law() {
    let ts = example();
    let f = Driver::state_constant(vec![1.0, -1.0, 0.5]);
    let avg = build_averaged_driver(&f, ts.partition(), ts.quasi_stationary()).unwrap();
    let g = avg.driver();
    assert!((g.eval(0.3, &[0.0], &[2.0], &[0.0], 0)[0] - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(g.eval(0.3, &[0.0], &[2.0], &[0.0], 1)[0], 0.5);
}

#[test]
fn singleton_partition_leaves_the_driver_unchanged() {
    let parts = StatePartition::singletons(3);
    let fast = GeneratorMatrix::zeros(3);
    let slow = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0, 0.0], vec![0.0, -1.0, 1.0], vec![1.0, 0.0, -1.0]]).unwrap();
    let ts = TwoScaleGenerator::new(fast, slow, 0.1, parts).unwrap();
    let f = Driver::linear(vec![0.4, -0.2, 0.9]);
    let avg = build_averaged_driver(&f, ts.partition(), ts.quasi_stationary()).unwrap();
    for i in 0..3 {
        assert_eq!(avg.driver().eval(0.5, &[0.0], &[1.5], &[0.0], i), f.eval(0.5, &[0.0], &[1.5], &[0.0], i));
    }
}

#[test]
fn ode_limit_for_linear_driver_is_exponential() {
    let fast = GeneratorMatrix::from_rows(&[vec![-3.0, 2.0, 1.0], vec![1.0, -2.0, 1.0], vec![2.0, 2.0, -4.0]]).unwrap();
    let ts = TwoScaleGenerator::new(fast, GeneratorMatrix::zeros(3), 0.1, StatePartition::single_block(3)).unwrap();
    let c = [0.6, -0.4, 0.2];
    let avg = build_averaged_driver(&Driver::linear(c.to_vec()), ts.partition(), ts.quasi_stationary()).unwrap();
    let cbar: f64 = ts.quasi_stationary()[0].nu().iter().zip(&c).map(|(n, c)| n * c).sum();
    let y0 = averaged_ode_value(&avg, 0, &[1.0], 0.0, 1.0, 1000)[0];
    assert!((y0 - cbar.exp()).abs() < 1e-12, "{y0} vs {}", cbar.exp());
}

#[test]
fn sweep_is_reproducible_and_contracts() {
    let ts = example();
    let opts = SweepOptions {
        epsilons: vec![0.2, 0.0125],
        n_paths: 800,
        steps: 50,
        initial_state: 2,
        seed: 99,
        ..Default::default()
    };
    let f = Driver::state_constant(vec![1.0, -1.0, 0.5]);
    let xi = TerminalCondition::constant(vec![0.0]);
    let a = epsilon_sweep(&ts, &f, &xi, &opts).unwrap();
    let b = epsilon_sweep(&ts, &f, &xi, &opts).unwrap();
    assert_eq!(a.limit_y0, b.limit_y0);
    assert_eq!(a.rungs[1].y0, b.rungs[1].y0);
    assert!(a.rungs.iter().all(|r| r.ks[0] > 0.0));
    assert!(a.rungs[1].ks[0] < a.rungs[0].ks[0]);
    assert_eq!(a.rungs[0].ks[0], ks_statistic(&a.rungs[0].y0[0], &a.limit_y0[0]));
}

#[test]
fn z_dependent_driver_is_refused() {
    let ts = example();
    let f = Driver::affine(vec![0.0; 3], vec![0.0; 3], vec![vec![1.0]; 3], 1).unwrap();
    let opts = SweepOptions {
        epsilons: vec![0.1],
        n_paths: 10,
        ..Default::default()
    };
    assert!(epsilon_sweep(&ts, &f, &TerminalCondition::constant(vec![0.0]), &opts).is_err());
}
