//! Invariants of the evaluators, the lattice scheme and the configuration layer.

use fullfrac::cli::{execute, Experiment, RunConfig};
use fullfrac::kernel::{log_weight, weight, KernelPoint};
use fullfrac::lattice::{Lattice, LatticeWeights, ModalField};
use fullfrac::operator::{evaluate, PiecewisePoly};
use fullfrac::solver::{march, GridProblem, Nonlinearity, SolverConfig};
use fullfrac::verification::{bounded_mp_problem, check_bounded_mp, check_measure_identity, fixed_number};
use fullfrac::{FracParams, QuadratureConfig, ScalarField};
use proptest::prelude::*;

fn sv() -> SolverConfig {
    SolverConfig { stop_when_steady: false, ..Default::default() }
}

fn constant_problem(cells: usize, ext: f64, hist: f64, f: Nonlinearity) -> GridProblem {
    GridProblem {
        lattice: Lattice::one_d(-1.0, 1.0, cells, 0.0, 1.0, cells),
        f,
        exterior: ModalField::constant(1, ext),
        history: ModalField::constant(1, hist),
        interface_tol: f64::INFINITY,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn kernel_weight_is_positive_and_matches_log(z in -20.0f64..20.0, sigma in 0.05f64..100.0, s in 0.05f64..0.95) {
        let p = FracParams::new(1, s).unwrap();
        let w = weight(&KernelPoint::new(vec![z], sigma).unwrap(), p).unwrap();
        prop_assert!(w > 0.0);
        prop_assert!((w.ln() - log_weight(z * z, sigma, p)).abs() < 1e-12 * (1.0 + w.ln().abs()));
    }

    #[test]
    fn lattice_weights_are_nonnegative(s in 0.1f64..0.9, cells in 4usize..48) {
        let p = FracParams::new(1, s).unwrap();
        let lw = LatticeWeights::new(&Lattice::one_d(-1.0, 1.0, cells, 0.0, 1.0, cells), p).unwrap();
        prop_assert!(lw.min_weight() >= 0.0);
    }

    #[test]
    fn measure_identity_holds_for_any_radius(s in 0.1f64..0.9, r in 0.1f64..10.0) {
        let p = FracParams::new(1, s).unwrap();
        let rep = check_measure_identity(&[0.0], 0.0, r, p, &QuadratureConfig::default()).unwrap();
        prop_assert!((rep.measured - 1.0).abs() <= 1e-8, "measured {}", rep.measured);
    }

    #[test]
    fn polynomial_average_matches_simpson_sum(
        c in proptest::collection::vec(-2.0f64..2.0, 1..6),
        lo in -2.0f64..0.0,
        width in 0.1f64..3.0,
        x in -3.0f64..3.0,
        sigma in 0.01f64..4.0,
    ) {
        let hi = lo + width;
        let poly = PiecewisePoly { pieces: vec![(lo, hi, c.clone())] };
        // independent route: composite Simpson on the piece
        let m = 20000;
        let h = width / m as f64;
        let g = |y: f64| {
            let z = y - x;
            (-(z * z) / (4.0 * sigma)).exp() / (4.0 * std::f64::consts::PI * sigma).sqrt() * poly.eval(y)
        };
        let mut sum = g(lo) + g(hi);
        for k in 1..m {
            sum += if k % 2 == 1 { 4.0 } else { 2.0 } * g(lo + k as f64 * h);
        }
        let want = sum * h / 3.0;
        prop_assert!((poly.gaussian_average(x, sigma) - want).abs() < 1e-9, "{} vs {want}", poly.gaussian_average(x, sigma));
    }

    #[test]
    fn fixed_numbers_round_trip(x in proptest::num::f64::NORMAL) {
        let v = fixed_number(x);
        let back: f64 = v.to_string().parse().unwrap();
        prop_assert_eq!(back, x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn symbol_oracle_on_random_modes(lambda in 0.0f64..2.0, xi in 0.2f64..2.0, s in 0.2f64..0.8, x in -1.0f64..1.0) {
        let p = FracParams::new(1, s).unwrap();
        let u = ScalarField::exp_cos(lambda, &[xi]);
        let got = evaluate(&u, &[x], 0.3, p, &QuadratureConfig { abs_tol: 1e-8, ..QuadratureConfig::default() }).unwrap().value;
        let want = (lambda + xi * xi).powf(s) * u.eval(&[x], 0.3);
        prop_assert!((got - want).abs() <= 1e-6 * (1.0 + want.abs()), "{got} vs {want}");
    }

    #[test]
    fn evaluate_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, s in 0.2f64..0.8) {
        let p = FracParams::new(1, s).unwrap();
        let cfg = QuadratureConfig { abs_tol: 1e-8, ..QuadratureConfig::default() };
        let u = ScalarField::gaussian_bump(1.0, &[0.0], 1.0, 0.0, 1.0);
        let v = ScalarField::exp_cos(0.5, &[1.0]);
        let (x, t) = ([0.2], 0.1);
        let eu = evaluate(&u, &x, t, p, &cfg).unwrap().value;
        let ev = evaluate(&v, &x, t, p, &cfg).unwrap().value;
        let ew = evaluate(&ScalarField::combine(a, &u, b, &v), &x, t, p, &cfg).unwrap().value;
        prop_assert!((ew - a * eu - b * ev).abs() <= 1e-7 * (1.0 + a.abs() * eu.abs() + b.abs() * ev.abs()));
    }

    #[test]
    fn discrete_comparison_principle(lo in -1.0f64..1.0, gap in 0.0f64..1.0, s in 0.2f64..0.8) {
        let p = FracParams::new(1, s).unwrap();
        let a = march(&constant_problem(16, lo, lo, Nonlinearity::zero()), p, &sv()).unwrap();
        let b = march(&constant_problem(16, lo + gap, lo + gap, Nonlinearity::zero()), p, &sv()).unwrap();
        for k in 0..=a.last_step() {
            for j in 0..=16 {
                prop_assert!(b.value(0, j, k) - a.value(0, j, k) >= -1e-12);
            }
        }
    }

    #[test]
    fn bounded_maximum_principle_on_seeds(seed in 0u64..1000) {
        let p = FracParams::new(1, 0.5).unwrap();
        let sol = march(&bounded_mp_problem(seed, 16, 16), p, &sv()).unwrap();
        let rep = check_bounded_mp(&sol, 1e-6);
        prop_assert!(rep.pass, "min {}", rep.measured);
    }
}

#[test]
fn constants_are_reproduced_exactly() {
    let p = FracParams::new(1, 0.5).unwrap();
    let sol = march(&constant_problem(32, 0.7, 0.7, Nonlinearity::zero()), p, &sv()).unwrap();
    for k in 0..=sol.last_step() {
        for j in 0..=32 {
            assert!((sol.value(0, j, k) - 0.7).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_data_give_the_zero_solution() {
    let p = FracParams::new(1, 0.3).unwrap();
    let sol = march(&constant_problem(16, 0.0, 0.0, Nonlinearity::allen_cahn()), p, &sv()).unwrap();
    assert!(sol.levels.iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn march_rejects_mismatched_interface() {
    let p = FracParams::new(1, 0.5).unwrap();
    let mut prob = constant_problem(8, 0.0, 1.0, Nonlinearity::zero());
    prob.interface_tol = 1e-6;
    assert!(march(&prob, p, &sv()).is_err());
}

#[test]
fn overrides_apply_before_validation() {
    let text = r#"{"experiment": "symbol-check", "params": {"n": 1, "s": 0.5}}"#;
    let cfg = RunConfig::load(text, &["params.s=0.25".into(), "grid.cells=64".into(), "options.field=bump".into()]).unwrap();
    assert_eq!(cfg.experiment, Experiment::SymbolCheck);
    assert_eq!(cfg.params.s, 0.25);
    assert_eq!(cfg.grid().cells, 64);
    assert!(RunConfig::load(text, &["params.s=1.5".into()]).is_err());
    assert!(RunConfig::load(text, &["params.z=1".into()]).is_err());
    assert!(RunConfig::load(text, &["noequals".into()]).is_err());
    assert!(RunConfig::load(r#"{"experiment": "nope"}"#, &[]).is_err());
}

#[test]
fn one_dimensional_experiments_reject_higher_dimensions() {
    let text = r#"{"experiment": "counterexample", "params": {"n": 2, "s": 0.5}}"#;
    assert!(RunConfig::load(text, &[]).is_err());
}

#[test]
fn measure_identity_experiment_runs() {
    let text = r#"{"experiment": "measure-identity", "params": {"n": 1, "s": 0.5}, "options": {"radii": [1.0]}}"#;
    let art = execute(&RunConfig::load(text, &[]).unwrap()).unwrap();
    assert_eq!(art.reports.len(), 1);
    assert!(art.reports[0].pass);
}
