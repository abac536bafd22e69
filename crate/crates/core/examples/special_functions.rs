//! Gamma, erfc and the two normalization constants for a few orders.

use fullfrac::special::{average_constant, erfc, gamma, normalization_constant, semigroup_prefactor};
use fullfrac::{FracParams, QuadratureConfig};

fn main() -> fullfrac::Result<()> {
    println!("Γ(1/2)² = {:.15} (π = {:.15})", gamma(0.5)?.powi(2), std::f64::consts::PI);
    println!("erfc(1) = {:.15}", erfc(1.0));
    let cfg = QuadratureConfig::default();
    println!("{:>4} {:>6} {:>22} {:>22} {:>22}", "n", "s", "C_{n,s}", "1/|Γ(−s)|", "C_0");
    for n in [1, 2, 3] {
        for s in [0.25, 0.5, 0.75] {
            let p = FracParams::new(n, s)?;
            let c0 = if n == 1 { format!("{:.15e}", average_constant(p, &cfg)?) } else { "-".into() };
            println!(
                "{n:>4} {s:>6} {:>22.15e} {:>22.15e} {c0:>22}",
                normalization_constant(p),
                semigroup_prefactor(s)
            );
        }
    }
    Ok(())
}
