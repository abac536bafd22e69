//! Allen–Cahn stripe on a coarse lattice, with the monotonicity scans and the final profile.

use fullfrac::solver::{allen_cahn_stripe, SolverConfig, StripeConfig};
use fullfrac::FracParams;

fn main() -> fullfrac::Result<()> {
    let p = FracParams::new(1, 0.75)?;
    let sc = StripeConfig { cells: 128, steps: 100, ..Default::default() };
    let run = allen_cahn_stripe(&sc, p, &SolverConfig::default())?;
    for rep in &run.reports {
        println!("{:<22} {:>12.3e} pass {}", rep.claim_id, rep.measured, rep.pass);
    }
    let sol = &run.solution;
    let last = sol.last_step();
    println!("profile at t = {}:", sol.time(last));
    for (x, u) in sol.profile(last).into_iter().step_by(16) {
        println!("  {x:>7.3} {u:>10.6}");
    }
    Ok(())
}
