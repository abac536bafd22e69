//! Kernel weights along a lag ray and truncation radii for a tail budget.

use fullfrac::kernel::{truncation, weight, KernelPoint};
use fullfrac::FracParams;

fn main() -> fullfrac::Result<()> {
    let p = FracParams::new(1, 0.5)?;
    println!("weight at z = 1 along σ:");
    for sigma in [0.01, 0.1, 0.25, 1.0, 10.0, 100.0] {
        let w = weight(&KernelPoint::new(vec![1.0], sigma)?, p)?;
        println!("  σ = {sigma:>6}: {w:.6e}");
    }
    for tol in [1e-4, 1e-8] {
        let b = truncation(p, tol, 1.0)?;
        println!("tol {tol:e}: R_max = {:.3e}, T_max = {:.3e}, discarded mass {:.3e}", b.R_max, b.T_max, b.tail_mass);
    }
    Ok(())
}
