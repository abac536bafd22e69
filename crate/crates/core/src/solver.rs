//! Time marching of (∂t − Δ)^s u = f(x, t, u) on lattice cylinders, and the monotonicity and
//! symmetry diagnostics run on the marched solutions.

use crate::error::{Error, Result};
use crate::lattice::{AxisProfile, DiscreteOperator, HistoryBuffer, Lattice, ModalField};
use crate::special::FracParams;
use crate::verification::Report;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

pub type RhsFn = Arc<dyn Fn(&[f64], f64, f64) -> f64 + Send + Sync>;

/// Right-hand side f(x, t, u) with its u-derivative and monotonicity metadata.
#[derive(Clone)]
pub struct Nonlinearity {
    pub name: String,
    f: RhsFn,
    df: RhsFn,
    /// Upper bound of ∂f/∂u over the states the run can reach.
    pub df_max: f64,
    /// f is non-increasing in u for |u| at or above this value.
    pub nonincreasing_beyond: Option<f64>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("df_max", &self.df_max)
            .field("nonincreasing_beyond", &self.nonincreasing_beyond)
            .finish()
    }
}

impl Nonlinearity {
    pub fn new<F, D>(name: &str, f: F, df: D, df_max: f64) -> Self
    where
        F: Fn(&[f64], f64, f64) -> f64 + Send + Sync + 'static,
        D: Fn(&[f64], f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.into(), f: Arc::new(f), df: Arc::new(df), df_max, nonincreasing_beyond: None }
    }

    pub fn zero() -> Self {
        let mut f = Self::new("zero", |_, _, _| 0.0, |_, _, _| 0.0, 0.0);
        f.nonincreasing_beyond = Some(0.0);
        f
    }

    /// u − u³.
    pub fn allen_cahn() -> Self {
        let mut f = Self::new("allen-cahn", |_, _, u| u - u * u * u, |_, _, u| 1.0 - 3.0 * u * u, 1.0);
        f.nonincreasing_beyond = Some(1.0 / 3f64.sqrt());
        f
    }

    /// rate·(target − u).
    pub fn relaxation(target: f64, rate: f64) -> Self {
        let mut f = Self::new("relaxation", move |_, _, u| rate * (target - u), move |_, _, _| -rate, -rate);
        if rate >= 0.0 {
            f.nonincreasing_beyond = Some(0.0);
        }
        f
    }

    /// a·u.
    pub fn linear(a: f64) -> Self {
        Self::new("linear", move |_, _, u| a * u, move |_, _, _| a, a)
    }

    /// g(x, t) − rate·u.
    pub fn source<G>(g: G, rate: f64) -> Self
    where
        G: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    {
        let mut f = Self::new("source", move |x, t, u| g(x, t) - rate * u, move |_, _, _| -rate, -rate);
        if rate >= 0.0 {
            f.nonincreasing_beyond = Some(0.0);
        }
        f
    }

    pub fn eval(&self, x: &[f64], t: f64, u: f64) -> f64 {
        (self.f)(x, t, u)
    }

    pub fn derivative(&self, x: &[f64], t: f64, u: f64) -> f64 {
        (self.df)(x, t, u)
    }
}

/// A lattice cylinder with its right-hand side and the data outside it.
#[derive(Debug, Clone)]
pub struct GridProblem {
    pub lattice: Lattice,
    pub f: Nonlinearity,
    /// Data on the spatial complement for t ≥ t0.
    pub exterior: ModalField,
    /// Data on all space for t < t0.
    pub history: ModalField,
    /// Allowed mismatch between exterior and history on the boundary at t0.
    pub interface_tol: f64,
}

impl GridProblem {
    pub fn validate(&self) -> Result<()> {
        let lat = &self.lattice;
        lat.validate()?;
        if self.exterior.n() != lat.n() || self.history.n() != lat.n() {
            return Err(Error::Validation("data dimension does not match the lattice".into()));
        }
        if !(self.interface_tol >= 0.0) {
            return Err(Error::Validation("interface tolerance must be nonnegative".into()));
        }
        for i in 0..lat.rows() {
            for j in [0, lat.cells] {
                let x = lat.point(i, j);
                let (e, h) = (self.exterior.eval(&x, lat.t0), self.history.eval(&x, lat.t0));
                if (e - h).abs() > self.interface_tol * (1.0 + e.abs()) {
                    return Err(Error::Validation(format!(
                        "exterior ({e}) and history ({h}) disagree at x = {x:?}, t = {}",
                        lat.t0
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Iteration controls of `march`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Sup-norm target of the nodal residual.
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Relative sup-norm change per step below which the run counts as steady.
    pub steady_tol: f64,
    /// Stop at the first steady step.
    pub stop_when_steady: bool,
    /// Fraction of the final levels used by the diagnostics.
    pub retained_fraction: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { residual_tol: 1e-10, max_iterations: 50, steady_tol: 1e-8, stop_when_steady: true, retained_fraction: 0.1 }
    }
}

/// Marched levels with the per-step residual log.
#[derive(Debug, Clone)]
pub struct Solution {
    pub lattice: Lattice,
    pub exterior: ModalField,
    /// levels[k][i · cols + j] for k = 0..=last computed step.
    pub levels: Vec<Vec<f64>>,
    /// Final nodal residual of each step (index k − 1).
    pub residuals: Vec<f64>,
    pub iterations: Vec<usize>,
    /// First step whose change fell below the steady tolerance.
    pub steady_at: Option<usize>,
    /// Model uncertainty of the far history integrals.
    pub tail_uncertainty: f64,
    pub retained_fraction: f64,
}

impl Solution {
    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.levels[k][i * self.lattice.cols() + j]
    }

    pub fn last_step(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        self.lattice.t(k)
    }

    /// Levels used by the diagnostics: the final fraction of the computed steps, at least one.
    pub fn retained(&self) -> std::ops::RangeInclusive<usize> {
        let last = self.last_step();
        let count = ((last as f64 * self.retained_fraction).ceil() as usize).clamp(1, last.max(1));
        (last + 1 - count).max(1).min(last)..=last
    }

    /// Extremes over interior nodes of levels 1..=last.
    pub fn interior_range(&self) -> (f64, f64) {
        let lat = &self.lattice;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 1..=self.last_step() {
            for i in 0..lat.rows() {
                for j in 1..lat.cells {
                    let v = self.value(i, j, k);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        (lo, hi)
    }

    /// Value at (x', x_n) on level k, with the exterior data outside the lattice.
    fn extended(&self, i: i64, j: i64, k: usize) -> f64 {
        let lat = &self.lattice;
        let rows = lat.rows() as i64;
        let ii = i.rem_euclid(rows) as usize;
        if j >= 0 && j <= lat.cells as i64 {
            self.value(ii, j as usize, k)
        } else {
            let xn = lat.lo + j as f64 * lat.h();
            let x = if lat.periodic.is_some() { vec![i as f64 * lat.hp(), xn] } else { vec![xn] };
            self.exterior.eval(&x, lat.t(k))
        }
    }

    /// Smallest forward difference along x_n over interior and boundary columns on the given levels.
    pub fn min_increment(&self, levels: impl Iterator<Item = usize>) -> f64 {
        let lat = &self.lattice;
        let mut m = f64::INFINITY;
        for k in levels {
            for i in 0..lat.rows() {
                for j in 0..lat.cells {
                    m = m.min(self.value(i, j + 1, k) - self.value(i, j, k));
                }
            }
        }
        m
    }

    /// x_n profile of row 0 on level k as (x_n, u) pairs.
    pub fn profile(&self, k: usize) -> Vec<(f64, f64)> {
        (0..self.lattice.cols()).map(|j| (self.lattice.x_n(j), self.value(0, j, k))).collect()
    }
}

/// March the problem from t0 to t1, one implicit lattice step at a time.
///
/// Each step solves c0·u − S0 u − f(x, t, u) = known by Newton's method. The Jacobian
/// diag(c0 − ∂f/∂u) − S0 is symmetric and strictly diagonally dominant when
/// c0 − Σ S0 > sup ∂f/∂u, which is checked before the step; the linear systems are solved by
/// Jacobi-preconditioned conjugate gradients.
pub fn march(prob: &GridProblem, p: FracParams, cfg: &SolverConfig) -> Result<Solution> {
    prob.validate()?;
    if p.n() != prob.lattice.n() {
        return Err(Error::Validation("parameter dimension does not match the lattice".into()));
    }
    let lat = &prob.lattice;
    let op = DiscreteOperator::new(lat, p, &prob.exterior, &prob.history)?;
    let (rows, cols, cells) = (lat.rows(), lat.cols(), lat.cells);
    let len = lat.len();
    let interior = |idx: usize| {
        let j = idx % cols;
        j != 0 && j != cells
    };
    let points: Vec<Vec<f64>> = (0..len).map(|idx| lat.point(idx / cols, idx % cols)).collect();
    let lag0_total = op.lag0_total();

    let boundary_level = |k: usize| {
        let t = lat.t(k);
        let mut v = vec![0.0; len];
        for i in 0..rows {
            for j in [0, cells] {
                v[i * cols + j] = prob.exterior.eval(&points[i * cols + j], t);
            }
        }
        v
    };
    let mut level0 = boundary_level(0);
    for idx in (0..len).filter(|&i| interior(i)) {
        level0[idx] = prob.history.eval(&points[idx], lat.t0);
    }
    let mut hb = HistoryBuffer::default();
    op.push_level(&mut hb, level0.clone());
    let mut levels = vec![level0];
    let mut residuals = Vec::new();
    let mut iterations = Vec::new();
    let mut steady_at = None;

    for k in 1..=lat.steps {
        let t = lat.t(k);
        let c0: Vec<f64> = (0..len).map(|idx| if interior(idx) { op.c0(idx % cols, k) } else { 0.0 }).collect();
        let margin = (1..cells).map(|j| op.c0(j, k)).fold(f64::INFINITY, f64::min) - lag0_total - prob.f.df_max;
        if !(margin > 0.0) {
            return Err(Error::Validation(format!(
                "time step too large for this right-hand side at level {k}: diagonal margin {margin:.3e} ≤ 0"
            )));
        }
        let ub = boundary_level(k);
        let base = op.lattice_sum(&hb, k, &ub);
        let data = op.data_level(k);
        let known: Vec<f64> =
            (0..len).map(|idx| if interior(idx) { base[idx] + data[idx] } else { 0.0 }).collect();

        let prev = levels.last().unwrap();
        let mut u: Vec<f64> = (0..len).map(|idx| if interior(idx) { prev[idx] } else { 0.0 }).collect();
        let residual = |u: &[f64]| -> Vec<f64> {
            let su = op.lag0(u);
            (0..len)
                .map(|idx| {
                    if interior(idx) {
                        c0[idx] * u[idx] - su[idx] - known[idx] - prob.f.eval(&points[idx], t, u[idx])
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let mut r = residual(&u);
        let mut res = sup(&r);
        let mut it = 0;
        while res > cfg.residual_tol {
            if it == cfg.max_iterations || !res.is_finite() {
                return Err(Error::StepFailure { level: k, t, residual: res });
            }
            let diag: Vec<f64> = (0..len)
                .map(|idx| if interior(idx) { c0[idx] - prob.f.derivative(&points[idx], t, u[idx]) } else { 1.0 })
                .collect();
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = pcg(&diag, |v| op.lag0(v), &interior, &rhs, (1e-3 * cfg.residual_tol).max(1e-10 * res));
            for (a, d) in u.iter_mut().zip(&delta) {
                *a += d;
            }
            r = residual(&u);
            res = sup(&r);
            it += 1;
        }
        let mut level = ub;
        for idx in (0..len).filter(|&i| interior(i)) {
            level[idx] = u[idx];
        }
        let change = level.iter().zip(prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = level.iter().map(|v| v.abs()).fold(1.0, f64::max);
        op.push_level(&mut hb, level.clone());
        levels.push(level);
        residuals.push(res);
        iterations.push(it);
        if steady_at.is_none() && change <= cfg.steady_tol * scale {
            steady_at = Some(k);
            if cfg.stop_when_steady {
                break;
            }
        }
    }
    Ok(Solution {
        lattice: lat.clone(),
        exterior: prob.exterior.clone(),
        levels,
        residuals,
        iterations,
        steady_at,
        tail_uncertainty: op.data.tail_uncertainty,
        retained_fraction: cfg.retained_fraction,
    })
}

fn sup(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

const PCG_MAX_ITERATIONS: usize = 500;

/// Solves (diag − S) x = b on the masked nodes by preconditioned conjugate gradients.
fn pcg<S, M>(diag: &[f64], s: S, mask: &M, b: &[f64], tol: f64) -> Vec<f64>
where
    S: Fn(&[f64]) -> Vec<f64>,
    M: Fn(usize) -> bool,
{
    let n = b.len();
    let apply = |x: &[f64]| -> Vec<f64> {
        let sx = s(x);
        (0..n).map(|i| if mask(i) { diag[i] * x[i] - sx[i] } else { 0.0 }).collect()
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = (0..n).map(|i| if mask(i) { b[i] } else { 0.0 }).collect();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(a, d)| a / d).collect();
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..PCG_MAX_ITERATIONS {
        if sup(&r) <= tol || rz == 0.0 {
            break;
        }
        let ad = apply(&d);
        let alpha = rz / dot(&d, &ad);
        for i in 0..n {
            x[i] += alpha * d[i];
            r[i] -= alpha * ad[i];
        }
        z = r.iter().zip(diag).map(|(a, dg)| a / dg).collect();
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            d[i] = z[i] + beta * d[i];
        }
    }
    x
}

/// Sliding scan: for each λ, max over nodes and retained levels of u(x, t) − u(x + λ·direction, t).
///
/// Shifts must land on lattice nodes; beyond the lattice the exterior data is used.
pub fn monotonicity_check(sol: &Solution, direction: &[f64], lambdas: &[f64]) -> Result<Vec<Report>> {
    let lat = &sol.lattice;
    if direction.len() != lat.n() || !(direction[lat.n() - 1] > 0.0) {
        return Err(Error::Validation("direction needs the lattice dimension and a positive last component".into()));
    }
    let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
    let steps = |len: f64, h: f64| -> Result<i64> {
        let q = len / h;
        if (q - q.round()).abs() > 1e-9 * q.abs().max(1.0) {
            return Err(Error::Validation(format!("shift {len} is not a multiple of the spacing {h}")));
        }
        Ok(q.round() as i64)
    };
    let mut out = Vec::new();
    for &lambda in lambdas {
        if !(lambda >= 0.0) {
            return Err(Error::Validation(format!("shift λ = {lambda} must be nonnegative")));
        }
        let dn = steps(lambda * direction[lat.n() - 1] / norm, lat.h())?;
        let dp = if lat.periodic.is_some() { steps(lambda * direction[0] / norm, lat.hp())? } else { 0 };
        let mut worst = f64::NEG_INFINITY;
        for k in sol.retained() {
            for i in 0..lat.rows() as i64 {
                for j in 0..=lat.cells as i64 {
                    let w = sol.extended(i, j, k) - sol.extended(i + dp, j + dn, k);
                    worst = worst.max(w);
                }
            }
        }
        out.push(
            Report::at_most("sliding_scan", worst, 0.0, 1e-8)
                .with("lambda", lambda)
                .with("levels", sol.retained().count()),
        );
    }
    Ok(out)
}

/// Largest spread across the periodic axis over all columns and levels.
pub fn symmetry_check(sol: &Solution) -> Report {
    let lat = &sol.lattice;
    let mut osc: f64 = 0.0;
    for k in 0..=sol.last_step() {
        for j in 0..lat.cols() {
            let col = (0..lat.rows()).map(|i| sol.value(i, j, k));
            let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            osc = osc.max(hi - lo);
        }
    }
    Report::at_most("one_dimensional_symmetry", osc, 0.0, 1e-6).with("rows", lat.rows())
}

/// Spread across the periodic axis on one level.
pub fn oscillation(sol: &Solution, k: usize) -> f64 {
    let lat = &sol.lattice;
    (0..lat.cols())
        .map(|j| {
            let col = (0..lat.rows()).map(|i| sol.value(i, j, k));
            let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Allen–Cahn stripe on (−L, L) along x_n, optionally with a periodic x' axis of `rows` nodes
/// at the same spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripeConfig {
    pub half_width: f64,
    pub cells: usize,
    pub steps: usize,
    pub t_end: f64,
    pub rows: Option<usize>,
    pub lambdas: Vec<f64>,
    pub interface_tol: f64,
}

impl Default for StripeConfig {
    fn default() -> Self {
        Self {
            half_width: 8.0,
            cells: 512,
            steps: 400,
            t_end: 20.0,
            rows: None,
            lambdas: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            interface_tol: 1e-4,
        }
    }
}

/// Solution and diagnostics of one stripe run.
#[derive(Debug, Clone)]
pub struct StripeRun {
    pub solution: Solution,
    pub reports: Vec<Report>,
}

/// Marches u − u³ from the tanh(x_n/√2) history with exterior ∓1 and runs the diagnostics.
pub fn allen_cahn_stripe(sc: &StripeConfig, p: FracParams, cfg: &SolverConfig) -> Result<StripeRun> {
    let l = sc.half_width;
    if l < 8.0 {
        return Err(Error::Validation(format!("stripe half-width {l} must be at least 8")));
    }
    if !(sc.t_end >= 20.0) {
        return Err(Error::Validation(format!("stripe end time {} must be at least 20", sc.t_end)));
    }
    let lattice = Lattice {
        lo: -l,
        hi: l,
        cells: sc.cells,
        periodic: sc.rows.map(|r| (r as f64 * 2.0 * l / sc.cells as f64, r)),
        t0: 0.0,
        t1: sc.t_end,
        steps: sc.steps,
    };
    let n = lattice.n();
    if p.n() != n {
        return Err(Error::Validation("parameter dimension does not match the stripe".into()));
    }
    // tanh(y/√2) equals ±1 to double precision beyond |y| = 40
    let tanh = AxisProfile::profile(|y| (y / 2f64.sqrt()).tanh(), -40.0, 40.0, 2.0);
    let prob = GridProblem {
        lattice,
        f: Nonlinearity::allen_cahn(),
        exterior: ModalField::along_normal(n, AxisProfile::step(0.0, -1.0, 1.0), 1.0, 0.0),
        history: ModalField::along_normal(n, tanh, 1.0, 0.0),
        interface_tol: sc.interface_tol,
    };
    let solution = march(&prob, p, cfg)?;
    let mut reports = Vec::new();
    let (lo, hi) = solution.interior_range();
    reports.push(Report::at_least("stripe_lower_bound", lo, -1.0, 1e-6));
    reports.push(Report::at_most("stripe_upper_bound", hi, 1.0, 1e-6));
    let inc = solution.min_increment(solution.retained());
    reports.push(Report::at_least("stripe_monotone", inc, 0.0, 1e-8).with("levels", solution.retained().count()));
    let last = solution.last_step();
    let margin = l / 4.0;
    let lat = &solution.lattice;
    let j_left = ((margin) / lat.h()).round() as usize;
    let j_right = lat.cells - j_left;
    let left = (0..lat.rows()).map(|i| solution.value(i, j_left, last)).fold(f64::NEG_INFINITY, f64::max);
    let right = (0..lat.rows()).map(|i| solution.value(i, j_right, last)).fold(f64::INFINITY, f64::min);
    reports.push(Report::at_most("stripe_left_limit", left, -1.0 + 0.05, 0.0).with("x_n", lat.x_n(j_left)));
    reports.push(Report::at_least("stripe_right_limit", right, 1.0 - 0.05, 0.0).with("x_n", lat.x_n(j_right)));
    let mut dir = vec![0.0; n];
    dir[n - 1] = 1.0;
    reports.extend(monotonicity_check(&solution, &dir, &sc.lambdas)?);
    if lat.periodic.is_some() {
        reports.push(symmetry_check(&solution));
    }
    for r in reports.iter_mut() {
        r.parameters.insert("s".into(), p.s().into());
        r.parameters.insert("steps_run".into(), last.into());
    }
    Ok(StripeRun { solution, reports })
}

/// Half-space run on (0, L): f = 1 − u, zero data on x_n ≤ 0 and zero history below L.
/// Beyond the truncation the data are plugged with the far state 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpaceConfig {
    pub length: f64,
    pub cells: usize,
    pub steps: usize,
    pub t_end: f64,
}

impl Default for HalfSpaceConfig {
    fn default() -> Self {
        Self { length: 8.0, cells: 256, steps: 200, t_end: 20.0 }
    }
}

pub fn half_space_problem(hc: &HalfSpaceConfig, f: Nonlinearity, plug: f64) -> GridProblem {
    let l = hc.length;
    GridProblem {
        lattice: Lattice::one_d(0.0, l, hc.cells, 0.0, hc.t_end, hc.steps),
        f,
        exterior: ModalField::along_normal(1, AxisProfile::step(0.5 * l, 0.0, plug), 1.0, 0.0),
        history: ModalField::along_normal(1, AxisProfile::step(l, 0.0, plug), 1.0, 0.0),
        interface_tol: 0.0,
    }
}

pub fn half_space_monotonicity(hc: &HalfSpaceConfig, p: FracParams, cfg: &SolverConfig) -> Result<(Solution, Vec<Report>)> {
    if p.n() != 1 {
        return Err(Error::Validation("the half-space run is one-dimensional".into()));
    }
    let sol = march(&half_space_problem(hc, Nonlinearity::relaxation(1.0, 1.0), 1.0), p, cfg)?;
    let last = sol.last_step();
    let lat = &sol.lattice;
    let min_final = (1..lat.cells).map(|j| sol.value(0, j, last)).fold(f64::INFINITY, f64::min);
    let mut pos = Report::at_least("half_space_positive", min_final, 0.0, 0.0);
    if min_final <= 0.0 {
        pos = pos.failed();
    }
    let inc = sol.min_increment(sol.retained());
    let reports = vec![
        pos.with("s", p.s()),
        Report::at_least("half_space_monotone", inc, 0.0, 1e-8).with("s", p.s()).with("levels", sol.retained().count()),
    ];
    Ok((sol, reports))
}
