//! Acceptance suite: each criterion prints one PASS/FAIL line, and the test fails if any fails.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture` to see the lines.

use fullfrac::cli::{local_limit_case, symbol_reports};
use fullfrac::kernel::{weight, KernelPoint};
use fullfrac::lattice::{Lattice, LatticeWeights, ModalField};
use fullfrac::operator::{cutoff_bound_check, evaluate, evaluate_space_only, local_limit_probe};
use fullfrac::solver::{allen_cahn_stripe, march, GridProblem, Nonlinearity, SolverConfig, StripeConfig};
use fullfrac::verification::{
    bounded_mp_runs, check_average_inequality, check_measure_identity, counterexample_grid, find_epsilon, random_bump,
    Report,
};
use fullfrac::{FracParams, QuadratureConfig, ScalarField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn all_pass(reports: &[Report]) -> bool {
    !reports.is_empty() && reports.iter().all(|r| r.pass)
}

fn worst(reports: &[Report]) -> String {
    match reports.iter().find(|r| !r.pass) {
        Some(r) => format!("first failure {} measured {:.3e} bound {:.3e}", r.claim_id, r.measured, r.bound_or_expected),
        None => format!("{} reports", reports.len()),
    }
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn measure_identity(cfg: &QuadratureConfig) -> Outcome {
    let mut reports = Vec::new();
    let mut err: f64 = 0.0;
    for s in [0.25, 0.5, 0.75] {
        let p = FracParams::new(1, s).unwrap();
        for r in [0.5, 1.0, 2.0] {
            let rep = check_measure_identity(&[0.0], 0.0, r, p, cfg).unwrap();
            err = err.max((rep.measured - 1.0).abs());
            reports.push(rep);
        }
    }
    let pass = all_pass(&reports) && err <= 1e-8;
    Outcome { pass, detail: format!("max |C0 r^2s mass - 1| = {err:.2e} (tol 1e-8)") }
}

fn symbol_oracle(cfg: &QuadratureConfig) -> Outcome {
    let reports = symbol_reports(1, cfg).unwrap();
    let sym = reports.iter().filter(|r| r.claim_id == "symbol").map(|r| r.measured.abs()).fold(0.0, f64::max);
    let mar = reports.iter().filter(|r| r.claim_id == "marchaud_symbol").map(|r| r.measured.abs()).fold(0.0, f64::max);
    let count = reports.iter().filter(|r| r.claim_id == "symbol").count();
    let pass = all_pass(&reports) && count == 9 && sym <= 1e-4 && mar <= 1e-6;
    Outcome { pass, detail: format!("{count} symbol cases max rel {sym:.2e} (1e-4), time-only max rel {mar:.2e} (1e-6)") }
}

fn half_space_harmonic(cfg: &QuadratureConfig) -> Outcome {
    // the exact value is zero, so only the absolute target applies
    let cfg = &QuadratureConfig { abs_tol: 1e-6, ..cfg.clone() };
    let mut worst: f64 = 0.0;
    for s in [0.25, 0.5, 0.75] {
        let p = FracParams::new(1, s).unwrap();
        let u = ScalarField::half_space_power(1, s);
        for x in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let v = evaluate_space_only(&u, &[x], p, cfg).unwrap().value;
            worst = worst.max(v.abs());
        }
    }
    Outcome { pass: worst <= 1e-4, detail: format!("max |operator| = {worst:.2e} over 15 points (tol 1e-4)") }
}

fn average_inequality(cfg: &QuadratureConfig) -> Outcome {
    let p = FracParams::new(1, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut reports = Vec::new();
    for _ in 0..20 {
        let (u, x0, t0) = random_bump(&mut rng);
        reports.extend(check_average_inequality(&u, &[x0], t0, &[0.5, 1.0, 2.0], p, cfg).unwrap());
    }
    let slack = reports
        .iter()
        .filter(|r| r.claim_id == "weighted_average_inequality")
        .map(|r| r.measured)
        .fold(f64::INFINITY, f64::min);
    let pass = all_pass(&reports) && slack >= -1e-8;
    Outcome { pass, detail: format!("20 bumps x 3 radii, min slack {slack:.3e} (>= -1e-8)") }
}

fn counterexample(cfg: &QuadratureConfig) -> Outcome {
    let p = FracParams::new(1, 0.5).unwrap();
    let (xs, ts) = counterexample_grid(128, 128);
    let res = find_epsilon(&xs, &ts, (0.0, 0.1), p, cfg).unwrap();
    let Some(eps) = res.epsilon else {
        return Outcome { pass: false, detail: format!("no admissible epsilon: {}", worst(&res.reports)) };
    };
    let op_min = res.values.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let pass = eps > 0.0 && eps <= 0.1 && op_min >= -1e-6 && res.min_u < 0.0 && all_pass(&res.reports);
    Outcome {
        pass,
        detail: format!("128x128: eps* = {eps:.4}, operator min {op_min:.3e} (>= -1e-6), interior min u {:.3e} (< 0)", res.min_u),
    }
}

fn bounded_mp() -> Outcome {
    let p = FracParams::new(1, 0.5).unwrap();
    let seeds: Vec<u64> = (1..=10).collect();
    let reports = bounded_mp_runs(&seeds, 64, 64, p, 1e-6).unwrap();
    let lo = reports.iter().map(|r| r.measured).fold(f64::INFINITY, f64::min);
    let pass = all_pass(&reports) && reports.len() == 10 && lo >= -1e-6;
    Outcome { pass, detail: format!("10 seeded runs, interior min {lo:.3e} (>= -1e-6)") }
}

fn gibbons() -> Outcome {
    let sv = SolverConfig::default();
    let p1 = FracParams::new(1, 0.75).unwrap();
    let one = allen_cahn_stripe(&StripeConfig::default(), p1, &sv).unwrap();
    let scan = one.reports.iter().filter(|r| r.claim_id == "sliding_scan").map(|r| r.measured).fold(f64::NEG_INFINITY, f64::max);
    let p2 = FracParams::new(2, 0.75).unwrap();
    let two = allen_cahn_stripe(&StripeConfig { rows: Some(64), ..Default::default() }, p2, &sv).unwrap();
    let sym = two.reports.iter().find(|r| r.claim_id == "one_dimensional_symmetry").map(|r| r.measured);
    let pass = all_pass(&one.reports)
        && scan <= 1e-8
        && one.reports.iter().filter(|r| r.claim_id == "sliding_scan").count() == 5
        && all_pass(&two.reports)
        && sym.is_some_and(|o| o <= 1e-6);
    let detail = format!(
        "1D max w_lambda {scan:.2e} (1e-8), {}; 2D 64x512 oscillation {:.2e} (1e-6), {}",
        worst(&one.reports),
        sym.unwrap_or(f64::NAN),
        worst(&two.reports)
    );
    Outcome { pass, detail }
}

fn scaling_law(cfg: &QuadratureConfig) -> Outcome {
    let p = FracParams::new(1, 0.5).unwrap();
    let vals: Vec<f64> = [0.5, 1.0, 2.0].iter().map(|&r| cutoff_bound_check(r, &[0.0], 0.0, p, cfg).unwrap()).collect();
    let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let spread = hi / lo - 1.0;
    Outcome { pass: lo > 0.0 && spread <= 0.1, detail: format!("scaled sups {vals:.4?}, spread {spread:.2e} (<= 0.1)") }
}

fn local_limit(cfg: &QuadratureConfig) -> Outcome {
    let (u, x, t, target) = local_limit_case(1);
    let errs = local_limit_probe(&u, &x, t, target, &[0.9, 0.95, 0.99], cfg).unwrap();
    let pass = errs.windows(2).all(|w| w[1] < w[0]);
    Outcome { pass, detail: format!("errors at s = 0.90, 0.95, 0.99: {}", list(&errs)) }
}

/// Sup error of the marched e^{−t}cos x (symbol zero, so f = 0) on (−1, 1) × (0, 1].
fn heat_error(cells: usize) -> f64 {
    let p = FracParams::new(1, 0.5).unwrap();
    let data = ModalField::exp_cos(-1.0, &[1.0]);
    let prob = GridProblem {
        lattice: Lattice::one_d(-1.0, 1.0, cells, 0.0, 1.0, cells),
        f: Nonlinearity::zero(),
        exterior: data.clone(),
        history: data.clone(),
        interface_tol: 0.0,
    };
    let sol = march(&prob, p, &SolverConfig { stop_when_steady: false, ..Default::default() }).unwrap();
    let lat = &sol.lattice;
    let mut e: f64 = 0.0;
    for k in 0..=sol.last_step() {
        for j in 0..=lat.cells {
            e = e.max((sol.value(0, j, k) - data.eval(&[lat.x_n(j)], lat.t(k))).abs());
        }
    }
    e
}

fn core_properties(cfg: &QuadratureConfig) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let p = FracParams::new(1, 0.5).unwrap();
    let u = ScalarField::gaussian_bump(1.0, &[0.0], 1.0, 0.0, 1.0);
    let v = ScalarField::exp_cos(1.0, &[2.0]);
    let (x, t) = ([0.3], 0.2);
    let eu = evaluate(&u, &x, t, p, cfg).unwrap().value;
    let ev = evaluate(&v, &x, t, p, cfg).unwrap().value;
    let ew = evaluate(&ScalarField::combine(2.0, &u, -3.0, &v), &x, t, p, cfg).unwrap().value;
    let lin = (ew - (2.0 * eu - 3.0 * ev)).abs() / (2.0 * eu.abs() + 3.0 * ev.abs());
    pass &= lin <= 1e-7;
    notes.push(format!("linearity {lin:.1e}"));

    let et = evaluate(&u.translated(&[0.7], -0.4), &[x[0] + 0.7], t - 0.4, p, cfg).unwrap().value;
    let tr = (et - eu).abs() / eu.abs();
    pass &= tr <= 1e-7;
    notes.push(format!("translation {tr:.1e}"));

    let r: f64 = 2.0;
    let ed = evaluate(&u.dilated(r), &[x[0] * r], t * r * r, p, cfg).unwrap().value;
    let sc = (ed * r.powf(2.0 * p.s()) - eu).abs() / eu.abs();
    pass &= sc <= 1e-7;
    notes.push(format!("scaling {sc:.1e}"));

    // kernel weights are strictly positive; lattice weights are nonnegative (the lag-0 self
    // entry is folded into the diagonal) and strictly positive for the neighbours
    let mut kmin = f64::INFINITY;
    let mut lmin = f64::INFINITY;
    let mut near = f64::INFINITY;
    for s in [0.25, 0.5, 0.75] {
        let q = FracParams::new(1, s).unwrap();
        for (z, sigma) in [(0.0, 0.1), (0.5, 1.0), (3.0, 2.0), (10.0, 50.0)] {
            kmin = kmin.min(weight(&KernelPoint::new(vec![z], sigma).unwrap(), q).unwrap());
        }
        let lw = LatticeWeights::new(&Lattice::one_d(-1.0, 1.0, 32, 0.0, 1.0, 32), q).unwrap();
        lmin = lmin.min(lw.min_weight());
        near = near.min(lw.get(0, 1, 0)).min(lw.get(0, -1, 0)).min(lw.get(0, 0, 1));
    }
    pass &= kmin > 0.0 && lmin >= 0.0 && near > 0.0;
    notes.push(format!("kernel min {kmin:.1e}, lattice min {lmin:.1e}, neighbour min {near:.1e}"));

    let errs: Vec<f64> = [32, 64, 128].iter().map(|&c| heat_error(c)).collect();
    pass &= errs.windows(2).all(|w| w[1] < w[0]) && errs[2] <= 5e-3;
    notes.push(format!("march errors {}", list(&errs)));
    Outcome { pass, detail: notes.join(", ") }
}

#[test]
fn acceptance() {
    let cfg = QuadratureConfig::default();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("1 measure identity", Box::new(|| measure_identity(&cfg))),
        ("2 symbol oracle", Box::new(|| symbol_oracle(&cfg))),
        ("3 half-space harmonic", Box::new(|| half_space_harmonic(&cfg))),
        ("4 weighted average inequality", Box::new(|| average_inequality(&cfg))),
        ("5 counterexample", Box::new(|| counterexample(&cfg))),
        ("6 bounded maximum principle", Box::new(bounded_mp)),
        ("7 gibbons diagnostics", Box::new(gibbons)),
        ("8 scaling law", Box::new(|| scaling_law(&cfg))),
        ("9 local limit", Box::new(|| local_limit(&cfg))),
        ("10 core properties", Box::new(|| core_properties(&cfg))),
    ];
    let mut failed = Vec::new();
    for (name, run) in &criteria {
        let start = Instant::now();
        let out = run();
        let line =
            format!("{} criterion {name}: {} [{:.1}s]", if out.pass { "PASS" } else { "FAIL" }, out.detail, start.elapsed().as_secs_f64());
        println!("{line}");
        if !out.pass {
            failed.push(line);
        }
    }
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
