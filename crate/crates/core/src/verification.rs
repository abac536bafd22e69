//! Checks of the mathematical claims, each producing a `Report`.

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;
use std::collections::BTreeMap;

/// Decimal with 17 significant digits, or null when not finite.
pub fn fixed_number(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::Value::Number(format!("{x:.16e}").parse().expect("formatted float"))
    } else {
        serde_json::Value::Null
    }
}

/// Parameter value in a report.
#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Num(f64),
    Int(i64),
    Text(String),
}

impl Serialize for Param {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Param::Num(x) => fixed_number(*x).serialize(s),
            Param::Int(i) => s.serialize_i64(*i),
            Param::Text(t) => s.serialize_str(t),
        }
    }
}

impl From<f64> for Param {
    fn from(x: f64) -> Self {
        Param::Num(x)
    }
}

impl From<usize> for Param {
    fn from(x: usize) -> Self {
        Param::Int(x as i64)
    }
}

impl From<u64> for Param {
    fn from(x: u64) -> Self {
        Param::Int(x as i64)
    }
}

impl From<&str> for Param {
    fn from(x: &str) -> Self {
        Param::Text(x.to_string())
    }
}

impl From<String> for Param {
    fn from(x: String) -> Self {
        Param::Text(x)
    }
}

/// One verified claim: measured value against a bound or expected value.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub claim_id: String,
    pub parameters: BTreeMap<String, Param>,
    pub measured: f64,
    pub bound_or_expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Serialize for Report {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(6))?;
        m.serialize_entry("claim_id", &self.claim_id)?;
        m.serialize_entry("parameters", &self.parameters)?;
        m.serialize_entry("measured", &fixed_number(self.measured))?;
        m.serialize_entry("bound_or_expected", &fixed_number(self.bound_or_expected))?;
        m.serialize_entry("tolerance", &fixed_number(self.tolerance))?;
        m.serialize_entry("pass", &self.pass)?;
        m.end()
    }
}

impl Report {
    fn new(claim_id: &str, measured: f64, bound: f64, tolerance: f64, pass: bool) -> Self {
        Self {
            claim_id: claim_id.to_string(),
            parameters: BTreeMap::new(),
            measured,
            bound_or_expected: bound,
            tolerance,
            pass,
        }
    }

    /// Passes iff |measured − expected| ≤ tolerance.
    pub fn close(claim_id: &str, measured: f64, expected: f64, tolerance: f64) -> Self {
        let pass = (measured - expected).abs() <= tolerance;
        Self::new(claim_id, measured, expected, tolerance, pass)
    }

    /// Passes iff measured ≤ bound + tolerance.
    pub fn at_most(claim_id: &str, measured: f64, bound: f64, tolerance: f64) -> Self {
        let pass = measured <= bound + tolerance;
        Self::new(claim_id, measured, bound, tolerance, pass)
    }

    /// Passes iff measured ≥ bound − tolerance.
    pub fn at_least(claim_id: &str, measured: f64, bound: f64, tolerance: f64) -> Self {
        let pass = measured >= bound - tolerance;
        Self::new(claim_id, measured, bound, tolerance, pass)
    }

    pub fn with(mut self, key: &str, value: impl Into<Param>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    /// Forces a failing verdict, keeping the numbers.
    pub fn failed(mut self) -> Self {
        self.pass = false;
        self
    }
}

use crate::error::{Error, Result};
use crate::field::{smoothstep, ScalarField};
use crate::lattice::{AxisProfile, Lattice, ModalField};
use crate::operator::{evaluate, evaluate_separable_grid_with, field_value, gaussian_average, PiecewisePoly, QuadratureConfig};
use crate::quad::{self, gauss_legendre};
use crate::solver::{march, GridProblem, Nonlinearity, Solution, SolverConfig};
use crate::special::{self, FracParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// C_0 r^{2s} ∫_{−∞}^{t0−r²} ∫_{|y−x0|>r} e^{−|x0−y|²/4(t0−τ)} (t0−τ)^{−(n/2+1+s)} dy dτ against 1.
///
/// The mass is integrated at radius r directly; C_0 comes from the unit radius.
pub fn check_measure_identity(x0: &[f64], t0: f64, r: f64, p: FracParams, cfg: &QuadratureConfig) -> Result<Report> {
    cfg.validate()?;
    if x0.len() != p.n() || !t0.is_finite() {
        return Err(Error::Validation("centre does not match the dimension".into()));
    }
    let c0 = special::average_constant(p, cfg)?;
    let mass = special::exterior_mass(p, r, cfg.rel_tol)?;
    let value = c0 * r.powf(2.0 * p.s()) * mass.value;
    Ok(Report::close("measure_identity", value, 1.0, 1e-8)
        .with("n", p.n())
        .with("s", p.s())
        .with("r", r)
        .with("t0", t0))
}

/// Past part of the weighted average: ∫_{σ>r²} ∫_{|z|>r} u(x0 − z, t0 − σ) e^{−z²/4σ} σ^{−(3/2+s)} dz dσ (n = 1).
///
/// Lags beyond 2^20 r² take u(x0, t0 − σ) as frozen at its value there.
fn weighted_tail(u: &ScalarField, x0: f64, t0: f64, r: f64, p: FracParams, cfg: &QuadratureConfig) -> Result<f64> {
    let s = p.s();
    let end = r * r * 1_048_576.0;
    let rule = gauss_legendre(12);
    let inner_rule = gauss_legendre(20);
    let ell = u.length_scale;
    let mut err = None;
    let body = quad::panels(rule, &quad::geometric_breaks(r * r, end, 2f64.sqrt()), |sig| {
        let tau = t0 - sig;
        let avg = match gaussian_average(u, &[x0], tau, sig, 1, cfg) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                return 0.0;
            }
        };
        let width = ell.min(0.25 * r).min(sig.sqrt());
        let nb = quad::uniform_breaks(-r, r, width);
        let g = |z: f64| (-z * z / (4.0 * sig)).exp() / (4.0 * PI * sig).sqrt();
        let inner = quad::panels(inner_rule, &nb, |z| u.eval(&[x0 - z], tau) * g(z));
        (4.0 * PI).sqrt() * sig.powf(-1.0 - s) * (avg - inner)
    });
    if let Some(e) = err {
        return Err(e);
    }
    let (far, _) = special::exterior_mass_beyond(p, r, end);
    Ok(body + field_value(u, &[x0], t0 - end)? * far)
}

/// Weighted average inequality at a past-global maximum (x0, t0), one report per radius,
/// plus the simplified form wherever the operator value is not positive.
pub fn check_average_inequality(
    u: &ScalarField,
    x0: &[f64],
    t0: f64,
    radii: &[f64],
    p: FracParams,
    cfg: &QuadratureConfig,
) -> Result<Vec<Report>> {
    cfg.validate()?;
    if p.n() != 1 || u.n() != 1 || x0.len() != 1 {
        return Err(Error::Validation("the average inequality check is one-dimensional".into()));
    }
    let u0 = field_value(u, x0, t0)?;
    // spot-verify the past-global maximum
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..512 {
        let y = x0[0] + 8.0 * u.length_scale * (2.0 * rng.gen::<f64>() - 1.0);
        let tau = t0 - 8.0 * u.length_scale.powi(2) * rng.gen::<f64>();
        let v = u.eval(&[y], tau);
        if v > u0 + 1e-12 * (1.0 + u0.abs()) {
            return Err(Error::Validation(format!(
                "u({y}, {tau}) = {v} exceeds the claimed past maximum {u0}"
            )));
        }
    }
    let op = evaluate(u, x0, t0, p, cfg)?.value;
    let c0 = special::average_constant(p, cfg)?;
    let cns = special::normalization_constant(p);
    let mut out = Vec::new();
    for &r in radii {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("radius must be positive, got {r}")));
        }
        let scale = c0 * r.powf(2.0 * p.s());
        let average = scale * weighted_tail(u, x0[0], t0, r, p, cfg)?;
        let rhs = scale / cns * op + average;
        out.push(
            Report::at_least("weighted_average_inequality", rhs - u0, 0.0, 1e-8)
                .with("r", r)
                .with("s", p.s())
                .with("u_max", u0)
                .with("operator", op)
                .with("weighted_average", average),
        );
        if op <= 0.0 {
            out.push(
                Report::at_least("simplified_average_inequality", average - u0, 0.0, 1e-8)
                    .with("r", r)
                    .with("s", p.s()),
            );
        }
    }
    Ok(out)
}

/// Seeded bump with its maximum at (x0, t0): amplitude, widths and centre drawn at random.
pub fn random_bump(rng: &mut impl Rng) -> (ScalarField, f64, f64) {
    let amp = rng.gen_range(0.5..2.0);
    let x0 = rng.gen_range(-1.0..1.0);
    let t0 = rng.gen_range(-1.0..1.0);
    let w = rng.gen_range(0.3..1.5);
    let wt = rng.gen_range(0.3..1.5);
    (ScalarField::gaussian_bump(amp, &[x0], w, t0, wt), x0, t0)
}

/// The separable counterexample u = X·T with its defining pieces.
#[derive(Debug, Clone)]
pub struct Counterexample {
    pub epsilon: f64,
    pub x_profile: ScalarField,
    pub t_profile: ScalarField,
    pub u: ScalarField,
}

/// Pieces of X and T: X = X_out + ε X_in, T = T_past + ε T_bump.
fn x_out(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        0.0
    } else {
        smoothstep(a - 1.0)
    }
}

fn x_in(x: f64) -> f64 {
    if x.abs() < 1.0 {
        -(1.0 - x * x).powi(2)
    } else {
        0.0
    }
}

/// Coefficients in y of c(a + b·y), with c given in powers of its argument.
fn compose(c: &[f64], a: f64, b: f64) -> Vec<f64> {
    let mut out = vec![0.0; c.len()];
    // Horner in polynomials: acc ← acc·(a + b y) + c_k
    for ck in c.iter().rev() {
        let mut next = vec![0.0; c.len()];
        for (j, v) in out.iter().enumerate() {
            next[j] += a * v;
            if j + 1 < c.len() {
                next[j + 1] += b * v;
            }
        }
        next[0] += ck;
        out = next;
    }
    out
}

/// X_out as a piecewise polynomial: smoothstep(|y| − 1) on 1 ≤ |y| ≤ 2, 1 beyond.
fn x_out_poly() -> PiecewisePoly {
    let step = [0.0, 0.0, 0.0, 10.0, -15.0, 6.0];
    PiecewisePoly {
        pieces: vec![
            (f64::NEG_INFINITY, -2.0, vec![1.0]),
            (-2.0, -1.0, compose(&step, -1.0, -1.0)),
            (1.0, 2.0, compose(&step, -1.0, 1.0)),
            (2.0, f64::INFINITY, vec![1.0]),
        ],
    }
}

/// X_in as a piecewise polynomial: −(1 − y²)² on [−1, 1].
fn x_in_poly() -> PiecewisePoly {
    PiecewisePoly { pieces: vec![(-1.0, 1.0, vec![-1.0, 0.0, 2.0, 0.0, -1.0])] }
}

fn t_past(t: f64) -> f64 {
    if t <= -2.0 {
        -1.0
    } else if t < -1.0 {
        smoothstep(t + 2.0) - 1.0
    } else {
        0.0
    }
}

fn t_bump(t: f64) -> f64 {
    if t > 0.125 && t < 0.875 {
        let r = (t - 0.125) / 0.75;
        16.0 * r * r * (1.0 - r) * (1.0 - r)
    } else {
        0.0
    }
}

fn x_field(f: fn(f64) -> f64, flat: bool) -> ScalarField {
    let mut g = ScalarField::new(1, move |x, _| f(x[0]))
        .bounded(1.0)
        .space_only()
        .length_scale(0.25)
        .with_space_breaks(0, vec![-2.0, -1.0, 1.0, 2.0]);
    if flat {
        g = g.flat_outside(vec![(-2.0, 2.0)]);
    }
    g
}

fn t_field(f: fn(f64) -> f64) -> ScalarField {
    ScalarField::new(1, move |_, t| f(t))
        .bounded(1.0)
        .time_only()
        .length_scale(0.25)
        .with_time_breaks(vec![-2.0, -1.0, 0.125, 0.875])
}

pub fn build_counterexample(epsilon: f64) -> Result<Counterexample> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    let e = epsilon;
    let x_profile = ScalarField::new(1, move |x, _| x_out(x[0]) + e * x_in(x[0]))
        .bounded(1.0)
        .space_only()
        .length_scale(0.25)
        .with_space_breaks(0, vec![-2.0, -1.0, 1.0, 2.0])
        .flat_outside(vec![(-2.0, 2.0)])
        .named("counterexample_X");
    let t_profile = ScalarField::new(1, move |_, t| t_past(t) + e * t_bump(t))
        .bounded(1.0)
        .time_only()
        .length_scale(0.25)
        .with_time_breaks(vec![-2.0, -1.0, 0.125, 0.875])
        .named("counterexample_T");
    let u = ScalarField::new(1, move |x, t| (x_out(x[0]) + e * x_in(x[0])) * (t_past(t) + e * t_bump(t)))
        .bounded(1.0)
        .length_scale(0.25)
        .with_space_breaks(0, vec![-2.0, -1.0, 1.0, 2.0])
        .with_time_breaks(vec![-2.0, -1.0, 0.125, 0.875])
        .named("counterexample");
    Ok(Counterexample { epsilon, x_profile, t_profile, u })
}

impl Counterexample {
    fn x(&self, x: f64) -> f64 {
        self.x_profile.eval(&[x], 0.0)
    }

    fn t(&self, t: f64) -> f64 {
        self.t_profile.eval(&[0.0], t)
    }

    /// Range and value-distribution constraints on `per_piece` samples of every piece.
    pub fn check_constraints(&self, per_piece: usize) -> Vec<Report> {
        let e = self.epsilon;
        let m = per_piece.max(2);
        let open = |a: f64, b: f64| (1..=m).map(move |i| a + (b - a) * i as f64 / (m + 1) as f64);
        let closed = |a: f64, b: f64| (0..m).map(move |i| a + (b - a) * i as f64 / (m - 1) as f64);
        let mut out = Vec::new();
        let mut viol = |name: &str, v: f64| out.push(Report::at_most(name, v, 0.0, 0.0).with("epsilon", e));
        // X pieces
        let v = closed(-1.0, 1.0).map(|x| (self.x(x) - 0.0).max(-e - self.x(x))).fold(f64::NEG_INFINITY, f64::max);
        viol("X_in_[-eps,0]_on_omega", v);
        let v = open(1.0, 2.0)
            .chain(open(-2.0, -1.0))
            .map(|x| {
                let y = self.x(x);
                (-y).max(y - 1.0).max(if y > 0.0 && y < 1.0 { f64::NEG_INFINITY } else { 0.0 })
            })
            .fold(f64::NEG_INFINITY, f64::max);
        viol("X_in_(0,1)_on_transition", v);
        let v = closed(2.0, 10.0).chain(closed(-10.0, -2.0)).map(|x| (self.x(x) - 1.0).abs()).fold(0.0, f64::max);
        viol("X_one_outside", v);
        // T pieces
        let v = open(0.125, 0.875)
            .map(|t| {
                let y = self.t(t);
                (y - e).max(if y > 0.0 { f64::NEG_INFINITY } else { 0.0 })
            })
            .fold(f64::NEG_INFINITY, f64::max);
        viol("T_in_(0,eps]_on_bump", v);
        let v = closed(-1.0, 0.125).chain(closed(0.875, 1.0)).map(|t| self.t(t).abs()).fold(0.0, f64::max);
        viol("T_zero_on_gaps", v);
        let v = open(-2.0, -1.0)
            .map(|t| {
                let y = self.t(t);
                if y > -1.0 && y < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    1.0
                }
            })
            .fold(f64::NEG_INFINITY, f64::max);
        viol("T_in_(-1,0)_on_transition", v);
        let v = closed(-10.0, -2.0).map(|t| (self.t(t) + 1.0).abs()).fold(0.0, f64::max);
        viol("T_minus_one_past", v);
        // smoothness by divided differences: X' Lipschitz, T' continuous and bounded
        let h = 1e-4;
        let d2 = closed(-3.0, 3.0)
            .map(|x| ((self.x(x + h) - 2.0 * self.x(x) + self.x(x - h)) / (h * h)).abs())
            .fold(0.0, f64::max);
        out.push(Report::at_most("X_derivative_lipschitz", d2, 64.0, 0.0).with("epsilon", e));
        let d1 = closed(-3.0, 1.5).map(|t| ((self.t(t + h) - self.t(t)) / h).abs()).fold(0.0, f64::max);
        let jump = closed(-3.0, 1.5)
            .map(|t| ((self.t(t + h) - self.t(t)) / h - (self.t(t) - self.t(t - h)) / h).abs())
            .fold(0.0, f64::max);
        out.push(Report::at_most("T_derivative_bounded", d1, 8.0, 0.0).with("epsilon", e));
        out.push(Report::at_most("T_derivative_continuous", jump, 0.0, 1e-2).with("epsilon", e));
        // value distribution
        let mut sign = |name: &str, xs: Vec<f64>, ts: Vec<f64>, want: f64| {
            let mut worst: f64 = 0.0;
            for &x in &xs {
                for &t in &ts {
                    worst = worst.max(-want * self.u.eval(&[x], t));
                }
            }
            out.push(Report::at_most(name, worst, 0.0, 0.0).with("epsilon", e));
        };
        let outside: Vec<f64> = closed(1.0, 4.0).chain(closed(-4.0, -1.0)).collect();
        let inside: Vec<f64> = open(-1.0, 1.0).collect();
        let now: Vec<f64> = open(0.0, 1.0).collect();
        let past: Vec<f64> = closed(-4.0, 0.0).collect();
        sign("u_nonneg_exterior_now", outside.clone(), now, 1.0);
        sign("u_nonneg_omega_past", inside, past.clone(), 1.0);
        sign("u_nonpos_exterior_past", outside, past, -1.0);
        let mid = self.u.eval(&[0.0], 0.5);
        out.push(Report::at_most("u_negative_inside", mid, 0.0, 0.0).with("epsilon", e).failed_unless(mid < 0.0));
        out
    }
}

impl Report {
    fn failed_unless(self, ok: bool) -> Self {
        if ok {
            self
        } else {
            self.failed()
        }
    }
}

/// Cell-centred sample grid of (−1, 1) × (0, 1] with `nx` by `nt` points.
pub fn counterexample_grid(nx: usize, nt: usize) -> (Vec<f64>, Vec<f64>) {
    let xs = (0..nx).map(|i| -1.0 + (i as f64 + 0.5) * 2.0 / nx as f64).collect();
    let ts = (1..=nt).map(|k| k as f64 / nt as f64).collect();
    (xs, ts)
}

/// Result of the ε search.
#[derive(Debug, Clone)]
pub struct EpsilonSearch {
    pub epsilon: Option<f64>,
    /// (ε, grid minimum of the operator) in visiting order.
    pub trace: Vec<(f64, f64)>,
    /// Interior minimum of u at the returned ε.
    pub min_u: f64,
    pub reports: Vec<Report>,
    /// Operator values on the grid at the returned ε, [i][k].
    pub values: Vec<Vec<f64>>,
}

/// Operator on the grid as a polynomial in ε: Op(u_ε) = A + ε B + ε² C.
pub struct CounterexampleOperator {
    xs: Vec<f64>,
    ts: Vec<f64>,
    coef: [Vec<Vec<f64>>; 3],
}

impl CounterexampleOperator {
    pub fn new(xs: &[f64], ts: &[f64], p: FracParams, cfg: &QuadratureConfig) -> Result<Self> {
        // pieces are resolved to a thousandth of the −1e-6 decision margin
        let cfg = &QuadratureConfig { abs_tol: cfg.abs_tol.max(1e-9), ..cfg.clone() };
        // spatial averages of the polynomial pieces are exact
        let grid = |xf: &ScalarField, poly: &PiecewisePoly, tf: &ScalarField| -> Result<Vec<Vec<f64>>> {
            let avg = |x: f64, sig: f64, _level: u32| Ok(poly.gaussian_average(x, sig));
            Ok(evaluate_separable_grid_with(xf, &avg, tf, xs, ts, p, cfg)?
                .into_iter()
                .map(|row| row.into_iter().map(|e| e.value).collect())
                .collect())
        };
        let (xo, xi) = (x_field(x_out, true), x_field(x_in, false));
        let (po, pi) = (x_out_poly(), x_in_poly());
        let (tp, tb) = (t_field(t_past), t_field(t_bump));
        let a = grid(&xo, &po, &tp)?;
        let b1 = grid(&xo, &po, &tb)?;
        let b2 = grid(&xi, &pi, &tp)?;
        let c = grid(&xi, &pi, &tb)?;
        let b = b1.iter().zip(&b2).map(|(r1, r2)| r1.iter().zip(r2).map(|(a, b)| a + b).collect()).collect();
        Ok(Self { xs: xs.to_vec(), ts: ts.to_vec(), coef: [a, b, c] })
    }

    pub fn values(&self, eps: f64) -> Vec<Vec<f64>> {
        let [a, b, c] = &self.coef;
        (0..self.xs.len())
            .map(|i| (0..self.ts.len()).map(|k| a[i][k] + eps * (b[i][k] + eps * c[i][k])).collect())
            .collect()
    }

    pub fn min(&self, eps: f64) -> f64 {
        self.values(eps).iter().flatten().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Largest ε in the search interval whose operator minimum on the grid is at least −abs_tol,
/// by 20 bisection steps, with the witnessed interior negativity of u.
pub fn find_epsilon(
    xs: &[f64],
    ts: &[f64],
    search: (f64, f64),
    p: FracParams,
    cfg: &QuadratureConfig,
) -> Result<EpsilonSearch> {
    if p.n() != 1 {
        return Err(Error::Validation("the counterexample is one-dimensional".into()));
    }
    let (lo, hi) = search;
    if !(lo >= 0.0 && hi > lo && hi < 1.0) {
        return Err(Error::Validation(format!("bad ε search interval ({lo}, {hi}]")));
    }
    if xs.iter().any(|x| x.abs() >= 1.0) || ts.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(Error::Validation("grid points must lie in (−1, 1) × (0, 1]".into()));
    }
    let op = CounterexampleOperator::new(xs, ts, p, cfg)?;
    search_epsilon(&op, search, cfg.abs_tol.max(1e-6))
}

/// The ε search of `find_epsilon` on an already assembled operator, with decision margin `tol`.
pub fn search_epsilon(op: &CounterexampleOperator, search: (f64, f64), tol: f64) -> Result<EpsilonSearch> {
    let (xs, ts) = (&op.xs[..], &op.ts[..]);
    let (lo, hi) = search;
    if !(lo >= 0.0 && hi > lo && hi < 1.0) {
        return Err(Error::Validation(format!("bad ε search interval ({lo}, {hi}]")));
    }
    let mut trace = Vec::new();
    let mut probe = |e: f64| {
        let m = op.min(e);
        trace.push((e, m));
        m
    };
    let eps = if probe(hi) >= -tol {
        Some(hi)
    } else {
        let (mut a, mut b) = (lo, hi);
        let ok_lo = lo > 0.0 && probe(lo) >= -tol || lo == 0.0;
        if !ok_lo {
            None
        } else {
            for _ in 0..20 {
                let mid = 0.5 * (a + b);
                if probe(mid) >= -tol {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            (a > 0.0).then_some(a)
        }
    };
    let mut reports = Vec::new();
    let (min_u, values) = match eps {
        Some(e) => {
            let ce = build_counterexample(e)?;
            let mut mu = f64::INFINITY;
            for &x in xs {
                for &t in ts {
                    mu = mu.min(ce.u.eval(&[x], t));
                }
            }
            let vals = op.values(e);
            let m = vals.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
            reports.push(Report::at_least("counterexample_operator_min", m, 0.0, tol).with("epsilon", e));
            let mut neg = Report::at_most("counterexample_interior_min", mu, 0.0, 0.0).with("epsilon", e);
            if mu >= 0.0 {
                neg = neg.failed();
            }
            reports.push(neg);
            (mu, vals)
        }
        None => {
            let best = trace.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
            reports.push(Report::at_least("counterexample_operator_min", best, 0.0, tol).failed().with("search", "failed"));
            (f64::NAN, Vec::new())
        }
    };
    // the margin should not shrink as ε decreases
    let mut sorted = trace.clone();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let drop = sorted.windows(2).map(|w| w[0].1 - w[1].1).fold(0.0, f64::max);
    reports.push(Report::at_most("counterexample_margin_monotone", drop, 0.0, 1e-12).with("probes", trace.len()));
    for r in reports.iter_mut() {
        r.parameters.insert("nx".into(), xs.len().into());
        r.parameters.insert("nt".into(), ts.len().into());
    }
    Ok(EpsilonSearch { epsilon: eps, trace, min_u, reports, values })
}

/// Interior minimum of a marched solution against −tol_mp.
pub fn check_bounded_mp(sol: &Solution, tol_mp: f64) -> Report {
    let (lo, _) = sol.interior_range();
    Report::at_least("bounded_maximum_principle", lo, 0.0, tol_mp).with("steps", sol.last_step())
}

/// One seeded bounded-domain problem on (−1, 1) × (0, 1]: nonnegative data and source.
pub fn bounded_mp_problem(seed: u64, cells: usize, steps: usize) -> GridProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = rng.gen_range(0.0..1.0);
    let amp = rng.gen_range(0.0..1.0) * base;
    let xi = rng.gen_range(0.5..4.0);
    let phase = rng.gen_range(0.0..2.0 * PI);
    let lift = rng.gen_range(0.0..1.0);
    let mu = rng.gen_range(0.5..4.0);
    let cos = AxisProfile::Cosine { xi, phase };
    let history = ModalField::constant(1, base).plus(ModalField::along_normal(1, cos, amp, 0.0));
    // exterior = history + lift·(1 − e^{−μt}), equal to the history at t = 0
    let exterior = history
        .clone()
        .plus(ModalField::constant(1, lift))
        .plus(ModalField::along_normal(1, AxisProfile::Const, -lift, -mu));
    let g0 = rng.gen_range(0.0..1.0);
    let g1 = rng.gen_range(0.0..1.0);
    let k = rng.gen_range(0.5..4.0);
    let f = Nonlinearity::source(move |x, t| g0 + g1 * (k * x[0] + t).sin().powi(2), 0.0);
    GridProblem {
        lattice: Lattice::one_d(-1.0, 1.0, cells, 0.0, 1.0, steps),
        f,
        exterior,
        history,
        interface_tol: 1e-12,
    }
}

/// Bounded-domain maximum principle over seeded runs.
pub fn bounded_mp_runs(seeds: &[u64], cells: usize, steps: usize, p: FracParams, tol_mp: f64) -> Result<Vec<Report>> {
    let cfg = SolverConfig { stop_when_steady: false, ..Default::default() };
    seeds
        .iter()
        .map(|&seed| {
            let sol = march(&bounded_mp_problem(seed, cells, steps), p, &cfg)?;
            Ok(check_bounded_mp(&sol, tol_mp).with("seed", seed))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_pieces_match_profiles() {
        let (po, pi) = (x_out_poly(), x_in_poly());
        for k in -300..=300 {
            let y = k as f64 / 100.0;
            assert!((po.eval(y) - x_out(y)).abs() < 1e-13, "X_out at {y}: {} vs {}", po.eval(y), x_out(y));
            assert!((pi.eval(y) - x_in(y)).abs() < 1e-14, "X_in at {y}");
        }
    }

    #[test]
    fn closed_form_averages_match_quadrature() {
        let cfg = QuadratureConfig::default();
        let (xo, xi) = (x_field(x_out, true), x_field(x_in, false));
        let (po, pi) = (x_out_poly(), x_in_poly());
        for x in [-0.9, -0.3, 0.0, 0.55, 0.99] {
            for sig in [1e-4, 0.01, 0.05, 0.3, 1.0, 2.0, 5.0, 10.0, 50.0, 400.0] {
                let a = gaussian_average(&xo, &[x], 0.0, sig, 2, &cfg).unwrap();
                let b = gaussian_average(&xi, &[x], 0.0, sig, 2, &cfg).unwrap();
                assert!((a - po.gaussian_average(x, sig)).abs() < 1e-10, "X_out x={x} σ={sig}: {a} vs {}", po.gaussian_average(x, sig));
                assert!((b - pi.gaussian_average(x, sig)).abs() < 1e-10, "X_in x={x} σ={sig}");
            }
        }
    }
}
