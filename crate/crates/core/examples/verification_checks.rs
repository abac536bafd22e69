//! Measure identity, average inequality on a random bump, and the counterexample search on a coarse grid.

use fullfrac::verification::{
    check_average_inequality, check_measure_identity, counterexample_grid, find_epsilon, random_bump,
};
use fullfrac::{FracParams, QuadratureConfig};
use rand::SeedableRng;

fn main() -> fullfrac::Result<()> {
    let cfg = QuadratureConfig::default();
    let p = FracParams::new(1, 0.5)?;
    for r in [0.5, 1.0, 2.0] {
        let rep = check_measure_identity(&[0.0], 0.0, r, p, &cfg)?;
        println!("measure identity r = {r}: {:.15} pass {}", rep.measured, rep.pass);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let (u, x0, t0) = random_bump(&mut rng);
    for rep in check_average_inequality(&u, &[x0], t0, &[0.5, 1.0, 2.0], p, &cfg)? {
        println!("{} slack {:.3e} pass {}", rep.claim_id, rep.measured, rep.pass);
    }
    let (xs, ts) = counterexample_grid(32, 32);
    let res = find_epsilon(&xs, &ts, (0.0, 0.1), p, &cfg)?;
    println!("counterexample: ε* = {:?}, interior min u = {:.3e}", res.epsilon, res.min_u);
    for rep in &res.reports {
        println!("  {} {:.3e} pass {}", rep.claim_id, rep.measured, rep.pass);
    }
    Ok(())
}
