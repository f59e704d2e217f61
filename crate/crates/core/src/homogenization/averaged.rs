use crate::bsde::{Driver, DriverArgs};
use crate::error::{Error, Result};
use crate::markov_chain::{QuasiStationaryDistribution, StatePartition};

/// Block-averaged driver
///
/// ```text
/// f̄(t, x, y, k) = Σ_j ν^k_j f(t, x, y, s_kj)
/// ```
///
/// over the aggregated states k = 0..l. A convex combination, so it keeps
/// the Lipschitz constant of f.
#[derive(Debug, Clone)]
pub struct AveragedDriver {
    partition: StatePartition,
    nus: Vec<QuasiStationaryDistribution>,
    driver: Driver,
}

impl AveragedDriver {
    pub fn driver(&self) -> &Driver {
        &self.driver
    }

    pub fn partition(&self) -> &StatePartition {
        &self.partition
    }

    pub fn weights(&self) -> &[QuasiStationaryDistribution] {
        &self.nus
    }
}

pub fn build_averaged_driver(
    f: &Driver,
    partition: &StatePartition,
    nus: &[QuasiStationaryDistribution],
) -> Result<AveragedDriver> {
    if !f.z_independent() {
        return Err(Error::ZDependentDriver);
    }
    if nus.len() != partition.n_blocks() {
        return Err(Error::DimensionMismatch(format!(
            "{} weight vectors for {} blocks",
            nus.len(),
            partition.n_blocks()
        )));
    }
    for (k, (nu, block)) in nus.iter().zip(partition.blocks()).enumerate() {
        if nu.len() != block.len() {
            return Err(Error::DimensionMismatch(format!(
                "block {k} has {} states but {} weights",
                block.len(),
                nu.len()
            )));
        }
    }
    if let Some(n) = f.n_states() {
        if partition.n_states() > n {
            return Err(Error::DimensionMismatch(format!(
                "partition covers {} states, driver only {n}",
                partition.n_states()
            )));
        }
    }
    let blocks: Vec<Vec<(usize, f64)>> = partition
        .blocks()
        .iter()
        .zip(nus)
        .map(|(b, nu)| b.iter().copied().zip(nu.nu().iter().copied()).collect())
        .collect();
    let base = f.clone();
    let k = f.k();
    let averaged = Driver::new(k, f.d(), f.lipschitz(), true, move |args, out| {
        let mut tmp = vec![0.0; k];
        out.fill(0.0);
        for &(state, w) in &blocks[args.state] {
            base.eval_into(&DriverArgs { state, ..*args }, &mut tmp);
            for (o, v) in out.iter_mut().zip(&tmp) {
                *o += w * v;
            }
        }
    })
    .with_states(partition.n_blocks());
    Ok(AveragedDriver {
        partition: partition.clone(),
        nus: nus.to_vec(),
        driver: averaged,
    })
}

/// Deterministic limit y(t_0) of y' = −f̄(t, y, k), y(T) = terminal, for a
/// chain frozen in aggregated state k (with l = 1 this is the full
/// averaging limit). Classical RK4 on `steps` uniform steps; x is held at 0.
pub fn averaged_ode_value(avg: &AveragedDriver, state: usize, terminal: &[f64], t0: f64, horizon: f64, steps: usize) -> Vec<f64> {
    let f = avg.driver();
    let (k, d) = (f.k(), f.d());
    let x = vec![0.0; d];
    let z = vec![0.0; k * d];
    let rhs = |t: f64, y: &[f64]| -> Vec<f64> { f.eval(t, &x, y, &z, state).iter().map(|v| -v).collect() };
    let h = (t0 - horizon) / steps as f64;
    let mut y = terminal.to_vec();
    let mut t = horizon;
    let add = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(u, v)| u + s * v).collect() };
    for _ in 0..steps {
        let k1 = rhs(t, &y);
        let k2 = rhs(t + 0.5 * h, &add(&y, 0.5 * h, &k1));
        let k3 = rhs(t + 0.5 * h, &add(&y, 0.5 * h, &k2));
        let k4 = rhs(t + h, &add(&y, h, &k3));
        for c in 0..k {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        t += h;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_weights() {
        let part = StatePartition::new(vec![vec![0, 1], vec![2]]).unwrap();
        let nus = vec![
            QuasiStationaryDistribution::from_vec(vec![2.0 / 3.0, 1.0 / 3.0]).unwrap(),
            QuasiStationaryDistribution::point_mass(),
        ];
        let f = Driver::state_constant(vec![3.0, -3.0, 7.0]);
        let avg = build_averaged_driver(&f, &part, &nus).unwrap();
        let g = avg.driver();
        assert!((g.eval(0.0, &[0.0], &[0.0], &[0.0], 0)[0] - 1.0).abs() < 1e-15);
        assert_eq!(g.eval(0.0, &[0.0], &[0.0], &[0.0], 1)[0], 7.0);
        assert_eq!(g.n_states(), Some(2));
    }

    #[test]
    fn z_dependent_rejected() {
        let f = Driver::affine(vec![0.0], vec![0.0], vec![vec![1.0]], 1).unwrap();
        let part = StatePartition::single_block(1);
        let r = build_averaged_driver(&f, &part, &[QuasiStationaryDistribution::point_mass()]);
        assert!(matches!(r, Err(Error::ZDependentDriver)));
    }

    #[test]
    fn ode_value_of_linear_driver() {
        let part = StatePartition::single_block(2);
        let nus = vec![QuasiStationaryDistribution::from_vec(vec![0.5, 0.5]).unwrap()];
        let avg = build_averaged_driver(&Driver::linear(vec![1.0, 0.0]), &part, &nus).unwrap();
        let y = averaged_ode_value(&avg, 0, &[1.0], 0.0, 1.0, 200);
        assert!((y[0] - 0.5f64.exp()).abs() < 1e-10);
    }
}
