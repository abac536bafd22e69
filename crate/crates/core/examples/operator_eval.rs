//! Operator values against closed forms: the symbol on e^{λt}cos(ξx), λ^s on e^{λt},
//! and zero on the half-space power (x_n)₊^s.

use fullfrac::operator::{evaluate, evaluate_space_only, evaluate_time_only};
use fullfrac::{FracParams, QuadratureConfig, ScalarField};

fn main() -> fullfrac::Result<()> {
    let cfg = QuadratureConfig::default();
    let p = FracParams::new(1, 0.5)?;
    let (lambda, xi, x, t) = (1.0, 2.0, 0.3, 0.5);
    let u = ScalarField::exp_cos(lambda, &[xi]);
    let e = evaluate(&u, &[x], t, p, &cfg)?;
    let want = (lambda + xi * xi).powf(p.s()) * u.eval(&[x], t);
    println!("space-time: {:.12e} (closed form {want:.12e}, estimate {:.1e})", e.value, e.error_estimate);

    let v = ScalarField::new(1, |_, t| t.exp()).bounded(t.exp()).time_only();
    let e = evaluate_time_only(&v, t, p, &cfg)?;
    println!("time only:  {:.12e} (closed form {:.12e})", e.value, t.exp());

    // the exact value is zero, so the target is absolute
    let abs = QuadratureConfig { abs_tol: 1e-6, ..cfg };
    let h = ScalarField::half_space_power(1, p.s());
    for x in [0.5, 1.0, 2.0, 4.0] {
        println!("half-space power at x = {x}: {:.3e}", evaluate_space_only(&h, &[x], p, &abs)?.value);
    }
    Ok(())
}
