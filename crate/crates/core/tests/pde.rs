use proptest::prelude::*;

use regime_bsde::error::Error;
use regime_bsde::markov_chain::{simulate_chain, ChainPath, GeneratorMatrix};
use regime_bsde::pde::{solve_pde, PdeGrid, PdeProblem, Reaction};
use regime_bsde::rng::StreamKey;

fn grid(nx: usize, nt: usize) -> PdeGrid {
    PdeGrid {
        horizon: 1.0,
        x_lo: -4.0,
        x_hi: 4.0,
        nx,
        nt,
    }
}

#[test]
fn space_constant_data_stays_space_constant() {
    let chain = ChainPath::new(0.0, 1.0, 0, vec![0.3, 0.7], vec![1, 0]).unwrap();
    let reaction = Reaction::new(1, 1.0, true, |a, out| out[0] = -a.u[0] + [1.0, 2.0][a.state]);
    let p = PdeProblem::new(reaction, |_, out| out[0] = 0.5, grid(41, 50)).with_sigma(|x| 1.0 + 0.2 * x * x / 16.0);
    let sol = solve_pde(&p, &chain).unwrap();
    for ti in 0..sol.times().len() {
        let level = sol.level(ti);
        assert!(level.iter().all(|v| *v == level[0]), "level {ti} not constant");
    }
}

#[test]
fn heat_error_falls_at_second_order() {
    let chain = ChainPath::constant(0, 0.0, 1.0);
    let exact = |t: f64, x: f64| {
        let v = 0.5 + (1.0 - t);
        (0.5 / v).sqrt() * (-x * x / (2.0 * v)).exp()
    };
    let err = |n: usize| {
        let g = PdeGrid { x_lo: -6.0, x_hi: 6.0, ..grid(n, n) };
        let sol = solve_pde(&PdeProblem::new(Reaction::zero(1), |x, out| out[0] = (-x * x).exp(), g), &chain).unwrap();
        let mut e: f64 = 0.0;
        for (ti, &t) in sol.times().iter().enumerate() {
            for (j, &x) in sol.xs().iter().enumerate() {
                e = e.max((sol.u(ti, j, 0) - exact(t, x)).abs());
            }
        }
        e
    };
    let ratio = err(100) / err(200);
    assert!(ratio > 3.5 && ratio < 4.5, "ratio {ratio}");
}

#[test]
fn degenerate_diffusion_is_rejected() {
    let chain = ChainPath::constant(0, 0.0, 1.0);
    let p = PdeProblem::new(Reaction::zero(1), |_, out| out[0] = 1.0, grid(21, 20)).with_sigma(|x| x);
    assert!(matches!(solve_pde(&p, &chain), Err(Error::NonEllipticSigma { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn integrating_factor_on_random_paths(c in prop::collection::vec(-1.5f64..1.5, 3), seed in any::<u64>()) {
        let q = GeneratorMatrix::from_rows(&[vec![-4.0, 3.0, 1.0], vec![2.0, -3.0, 1.0], vec![1.0, 1.0, -2.0]]).unwrap();
        let chain = simulate_chain(&q, 0, 0.0, 1.0, &mut StreamKey::new(seed).label("pde-prop").rng());
        let p = PdeProblem::new(Reaction::linear(c.clone()), |_, out| out[0] = 1.0, grid(11, 100));
        let sol = solve_pde(&p, &chain).unwrap();
        for (ti, &t) in sol.times().iter().enumerate() {
            let exact = chain.occupation(t, 1.0, 3).iter().zip(&c).map(|(o, c)| o * c).sum::<f64>().exp();
            prop_assert!((sol.u(ti, 5, 0) / exact - 1.0).abs() < 1e-8);
        }
    }
}
