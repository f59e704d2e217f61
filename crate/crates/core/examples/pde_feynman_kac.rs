//! Solve the semilinear PDE along one chain path and cross-check it against
//! the forward–backward SDE: heat equation with a Gaussian bump (closed
//! form known) and a regime-switching linear reaction (exact integrating
//! factor along the path).

use std::time::Instant;

use regime_bsde::markov_chain::ChainPath;
use regime_bsde::pde::{
    feynman_kac_check, feynman_kac_check_against, gradient_identity_check, solve_pde, FkOptions, PdeGrid,
    PdeProblem, ProbePoint, Reaction,
};

const S2: f64 = 0.5; // variance of the bump

fn heat_exact(tau: f64, x: f64) -> f64 {
    (S2 / (S2 + tau)).sqrt() * (-x * x / (2.0 * (S2 + tau))).exp()
}

fn heat_problem(nx: usize, nt: usize) -> PdeProblem {
    let grid = PdeGrid {
        horizon: 1.0,
        x_lo: -6.0,
        x_hi: 6.0,
        nx,
        nt,
    };
    PdeProblem::new(Reaction::zero(1), |x, out| out[0] = (-x * x / (2.0 * S2)).exp(), grid)
}

fn max_error(nx: usize, nt: usize, chain: &ChainPath) -> f64 {
    let sol = solve_pde(&heat_problem(nx, nt), chain).unwrap();
    let mut err: f64 = 0.0;
    for (ti, &t) in sol.times().iter().enumerate() {
        for (j, &x) in sol.xs().iter().enumerate() {
            err = err.max((sol.u(ti, j, 0) - heat_exact(1.0 - t, x)).abs());
        }
    }
    err
}

fn main() -> regime_bsde::error::Result<()> {
    let started = Instant::now();
    let still = ChainPath::constant(0, 0.0, 1.0);
    let e400 = max_error(400, 400, &still);
    let e200 = max_error(200, 200, &still);
    println!("heat: max error 400x400 = {e400:.3e}, 200x200 = {e200:.3e}, ratio {:.2}", e200 / e400);

    // regime path with jumps and a linear reaction c_i u, h = 1
    let c = [1.0, -1.0, 0.5];
    let chain = ChainPath::new(0.0, 1.0, 2, vec![0.137, 0.42, 0.8031], vec![0, 1, 2])?;
    let grid = PdeGrid {
        horizon: 1.0,
        x_lo: -5.0,
        x_hi: 5.0,
        nx: 101,
        nt: 100,
    };
    let linear = PdeProblem::new(Reaction::linear(c.to_vec()), |_, out| out[0] = 1.0, grid);
    let sol = solve_pde(&linear, &chain)?;
    let exact = chain.occupation(0.0, 1.0, 3).iter().zip(&c).map(|(o, c)| o * c).sum::<f64>().exp();
    println!("linear reaction: u(0,0) = {:.12}, exact {exact:.12}, rel err {:.2e}", sol.u(0, 50, 0), (sol.u(0, 50, 0) / exact - 1.0).abs());

    let probes: Vec<ProbePoint> = [-1.0, -0.5, 0.0, 0.5, 1.0].iter().map(|&x| ProbePoint::new(0.0, x)).collect();
    let opts = FkOptions { seed: 7, ..Default::default() };
    let heat = heat_problem(400, 400);
    for (name, problem, path) in [("heat", &heat, &still), ("linear", &linear, &chain)] {
        let fk = feynman_kac_check(problem, path, &probes, &opts)?;
        for r in &fk.probes {
            println!(
                "{name} FK x={:+.1}: u={:.5} Y={:.5} se={:.1e} |d|={:.1e} allow={:.1e} {}",
                r.x, r.pde, r.bsde.mean, r.bsde.se, r.discrepancy, r.allowance, if r.pass { "ok" } else { "FAIL" }
            );
        }
        let gr = gradient_identity_check(problem, path, &probes, &opts)?;
        for r in &gr.probes {
            println!(
                "{name} grad x={:+.1}: du*s={:.5} Z={:.5} se={:.1e} {}",
                r.x, r.pde, r.bsde.mean, r.bsde.se, if r.pass { "ok" } else { "FAIL" }
            );
        }
        println!("{name}: FK {}, gradient {}, growth ratio {:.3}", fk.pass, gr.pass, gr.growth_ratio);
        let corrupted = solve_pde(problem, path)?.scaled(1.1);
        let neg = feynman_kac_check_against(problem, path, &probes, &opts, &corrupted)?;
        println!("{name}: corrupted field accepted = {}", neg.pass);
    }
    println!("elapsed {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
