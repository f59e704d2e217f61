use proptest::prelude::*;

use regime_bsde::markov_chain::{
    aggregate_generator, aggregate_path, occupation_deviation, quasi_stationary, simulate_chain, validate_generator,
    verify_decomposition, GeneratorMatrix, OccupationOptions, StatePartition, TwoScaleGenerator,
};
use regime_bsde::rng::StreamKey;

/// Generator with the given off-diagonal rates, row by row.
fn generator(m: usize, rates: &[f64]) -> GeneratorMatrix {
    let mut rows = vec![vec![0.0; m]; m];
    let mut it = rates.iter();
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            if i != j {
                *v = *it.next().unwrap();
            }
        }
        row[i] = -row.iter().sum::<f64>();
    }
    GeneratorMatrix::from_rows(&rows).unwrap()
}

fn irreducible() -> impl Strategy<Value = GeneratorMatrix> {
    (2usize..=5).prop_flat_map(|m| prop::collection::vec(0.1f64..5.0, m * (m - 1)).prop_map(move |r| generator(m, &r)))
}

/// Two fast blocks of sizes 2 and 1..=3 plus a dense slow part.
fn two_scale() -> impl Strategy<Value = TwoScaleGenerator> {
    (1usize..=3).prop_flat_map(|b| {
        let m = 2 + b;
        (
            prop::collection::vec(0.2f64..4.0, 2),
            prop::collection::vec(0.2f64..4.0, b * (b - 1)),
            prop::collection::vec(0.0f64..3.0, m * (m - 1)),
            0.01f64..0.5,
        )
            .prop_map(move |(r1, r2, slow, eps)| {
                let mut fast = vec![vec![0.0; m]; m];
                let g1 = generator(2, &r1).to_rows();
                let g2 = generator(b, &r2).to_rows();
                for i in 0..2 {
                    fast[i][..2].copy_from_slice(&g1[i]);
                }
                for i in 0..b {
                    fast[2 + i][2..].copy_from_slice(&g2[i]);
                }
                let partition = StatePartition::new(vec![vec![0, 1], (2..m).collect()]).unwrap();
                TwoScaleGenerator::new(GeneratorMatrix::from_rows(&fast).unwrap(), generator(m, &slow), eps, partition)
                    .unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quasi_stationary_is_invariant(q in irreducible()) {
        let nu = quasi_stationary(&q).unwrap();
        prop_assert!((nu.nu().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(nu.nu().iter().all(|&v| v >= 0.0));
        for t in [0.1, 1.0, 10.0] {
            let p = q.transition_matrix(t);
            for j in 0..q.dim() {
                let moved: f64 = (0..q.dim()).map(|i| nu.nu()[i] * p[(i, j)]).sum();
                prop_assert!((moved - nu.nu()[j]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn transition_matrix_is_stochastic(q in irreducible(), t in 0.0f64..5.0) {
        let p = q.transition_matrix(t);
        for i in 0..q.dim() {
            let s: f64 = (0..q.dim()).map(|j| p[(i, j)]).sum();
            prop_assert!((s - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn aggregated_generator_is_valid(ts in two_scale()) {
        let qbar = aggregate_generator(ts.slow(), ts.partition(), ts.quasi_stationary()).unwrap();
        prop_assert_eq!(qbar.dim(), 2);
        prop_assert!(validate_generator(qbar.rates().clone(), 1e-9).is_ok());
        for row in qbar.to_rows() {
            prop_assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn composition_round_trips(ts in two_scale()) {
        let report = verify_decomposition(&ts.compose(), &ts, 1e-9).unwrap();
        prop_assert!(report.pass);
        prop_assert!(report.max_residual <= 1e-9 * (1.0 / ts.epsilon()));
    }

    #[test]
    fn aggregated_path_matches_block_map(ts in two_scale(), seed in any::<u64>(), start in 0usize..3) {
        let q = ts.compose();
        let path = simulate_chain(&q, start, 0.0, 1.0, &mut StreamKey::new(seed).label("prop").rng());
        let agg = aggregate_path(&path, ts.partition()).unwrap();
        for n in 0..1000 {
            let t = n as f64 / 1000.0;
            prop_assert_eq!(agg.state_at(t), ts.partition().block_of(path.state_at(t)).unwrap());
        }
        prop_assert!(agg.jump_times().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn simulation_is_reproducible(q in irreducible(), seed in any::<u64>()) {
        let key = StreamKey::new(seed).label("repro").index(3);
        let a = simulate_chain(&q, 0, 0.0, 2.0, &mut key.rng());
        let b = simulate_chain(&q, 0, 0.0, 2.0, &mut key.rng());
        prop_assert_eq!(a, b);
    }
}

#[test]
fn singleton_partition_deviation_is_exactly_zero() {
    let q = generator(3, &[1.0, 2.0, 0.5, 1.5, 3.0, 1.0]);
    let ts = TwoScaleGenerator::new(GeneratorMatrix::zeros(3), q, 0.1, StatePartition::singletons(3)).unwrap();
    let opts = OccupationOptions {
        n_paths: 200,
        ..Default::default()
    };
    let report = occupation_deviation(&ts, |t| 1.0 + t, &opts).unwrap();
    assert!(report.entries.iter().all(|e| e.estimate.mean == 0.0 && e.estimate.se == 0.0));
}

#[test]
fn absorbing_state_holds_until_horizon() {
    let q = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0], vec![0.0, 0.0]]).unwrap();
    let key = StreamKey::new(9).label("absorb");
    let n = 20_000;
    let mut total = 0.0;
    for p in 0..n {
        let path = simulate_chain(&q, 0, 0.0, 50.0, &mut key.index(p).rng());
        assert!(path.n_jumps() <= 1);
        total += path.jump_times().first().copied().unwrap_or(50.0);
    }
    // Exponential(1) absorption time; 50 is far in the tail
    let mean = total / n as f64;
    assert!((mean - 1.0).abs() < 4.0 / (n as f64).sqrt(), "mean absorption time {mean}");
}
