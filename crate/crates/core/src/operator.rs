//! Pointwise evaluation of (∂t − Δ)^s by singular quadrature.
//!
//! All variants reduce to a one-dimensional integral ∫_0^∞ x^{-1-β} D(x) dx where D
//! vanishes at the origin like a power of x. The integral is split into a small
//! slab (0, x_c] where D is replaced by a fitted Taylor model, a body of
//! Gauss–Legendre panels, and a far tail where D is replaced by a least-squares
//! power model. For the space–time operator x = σ is the time lag and
//! D(σ) = u(x,t) − E[u(x − 2√σ W, t − σ)] with W standard normal in R^n scaled by 1/√2.

use crate::error::{Error, Result};
use crate::field::{Bound, Dependence, ScalarField, Smoothness};
use crate::quad::{self, gauss_legendre};
use crate::special::{self, FracParams};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Tail handling parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailConfig {
    /// Largest lag integrated by panels, in units of the split lag.
    pub lag_factor: f64,
    /// The far model is fitted on [x_max / fit_window, x_max].
    pub fit_window: f64,
}

impl Default for TailConfig {
    fn default() -> Self {
        Self {
            lag_factor: 1e6,
            fit_window: 16.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Near/far split of the time lag at unit length scale.
    pub split_lag: f64,
    /// Grading power of the lag mesh near zero; `None` picks min(2/(1−s), 8).
    pub grade_exponent: Option<f64>,
    /// Panels per unit of the Gaussian half-width in the spatial average.
    pub panels_space: usize,
    /// Graded panels on (0, split_lag].
    pub panels_time: usize,
    pub tail: TailConfig,
    pub gl_order: usize,
    /// Width of the Taylor-modelled slab relative to the split lag.
    pub taylor_fraction: f64,
    pub max_refinements: u32,
    /// Cap on spatial panels per half-axis in the Gaussian average.
    pub max_axis_panels: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            split_lag: 1.0,
            grade_exponent: None,
            panels_space: 8,
            panels_time: 16,
            tail: TailConfig::default(),
            gl_order: 12,
            taylor_fraction: 1e-3,
            max_refinements: 2,
            max_axis_panels: 2048,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Validation(format!("quadrature.{name} must be positive, got {v}")))
            }
        };
        pos(self.rel_tol, "rel_tol")?;
        pos(self.abs_tol, "abs_tol")?;
        pos(self.split_lag, "split_lag")?;
        pos(self.taylor_fraction, "taylor_fraction")?;
        pos(self.tail.lag_factor, "tail.lag_factor")?;
        if self.tail.fit_window <= 2.0 {
            return Err(Error::Validation("quadrature.tail.fit_window must exceed 2".into()));
        }
        if let Some(g) = self.grade_exponent {
            if !(g >= 1.0) {
                return Err(Error::Validation(format!("quadrature.grade_exponent must be >= 1, got {g}")));
            }
        }
        if self.panels_space == 0 || self.panels_time == 0 || self.max_axis_panels == 0 {
            return Err(Error::Validation("quadrature panel counts must be positive".into()));
        }
        if !(2..=64).contains(&self.gl_order) {
            return Err(Error::Validation("quadrature.gl_order must be in 2..=64".into()));
        }
        if self.taylor_fraction >= 0.5 {
            return Err(Error::Validation("quadrature.taylor_fraction must be below 0.5".into()));
        }
        Ok(())
    }

    fn grade(&self, s: f64) -> f64 {
        self.grade_exponent.unwrap_or((2.0 / (1.0 - s)).min(8.0))
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

/// Operator value with its error budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub value: f64,
    pub error_estimate: f64,
    /// Contribution of the modelled far tail (already included in `value`).
    pub tail: f64,
}

// ---------------------------------------------------------------------------
// one-dimensional singular integral engine

/// Integration plan for ∫_0^∞ x^{-1-β} D(x) dx.
#[derive(Debug, Clone)]
pub(crate) struct SingularPlan {
    pub beta: f64,
    pub cut: f64,
    /// Exponents of the Taylor model on (0, cut]; `None` starts the body at `cut` with nothing below.
    pub taylor_exps: Option<[f64; 3]>,
    /// D = w(x)·(Taylor model) on the slab with w(x) = 1 + Σ b x^f given as (b, f) pairs.
    pub slab_weight: Vec<(f64, f64)>,
    /// Panel breakpoints from `cut` to the end of the body.
    pub breaks: Vec<f64>,
    pub tail_exps: Vec<f64>,
    pub fit_from: f64,
    pub order: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SingularOutcome {
    pub value: f64,
    pub tail: f64,
    pub model_uncertainty: f64,
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut m = a;
        for i in 0..3 {
            m[i][k] = b[i];
        }
        *o = det(m) / d;
    }
    out
}

impl SingularPlan {
    /// ∫_0^{x_c} x^{-1-β} D with D ≈ Σ c_k x^{e_k} fitted at x_c, x_c/2, x_c/4.
    /// The uncertainty extrapolates the decay of the fitted terms to the first omitted one.
    fn taylor_slab<F>(&self, e: [f64; 3], level: u32, d: &mut F) -> Result<(f64, f64)>
    where
        F: FnMut(f64, u32) -> Result<f64>,
    {
        let xs = [self.cut, 0.5 * self.cut, 0.25 * self.cut];
        let weight = |x: f64| 1.0 + self.slab_weight.iter().map(|&(b, f)| b * x.powf(f)).sum::<f64>();
        let mut ds = [0.0; 3];
        for (v, &x) in ds.iter_mut().zip(&xs) {
            *v = d(x, level)? / weight(x);
        }
        // scaled unknowns c_k x_c^{e_k}
        let mut a = [[0.0; 3]; 3];
        for i in 0..3 {
            for k in 0..3 {
                a[i][k] = (xs[i] / self.cut).powf(e[k]);
            }
        }
        let c = solve3(a, ds);
        let xc = self.cut;
        let terms: Vec<f64> = (0..3)
            .map(|k| {
                let lead = xc.powf(-self.beta) / (e[k] - self.beta);
                let corr: f64 = self
                    .slab_weight
                    .iter()
                    .map(|&(b, f)| b * xc.powf(f - self.beta) / (e[k] + f - self.beta))
                    .sum();
                c[k] * (lead + corr)
            })
            .collect();
        let value = terms.iter().sum();
        let (t1, t2) = (terms[1].abs(), terms[2].abs());
        let next = if t1 > 0.0 { t2 * (t2 / t1).min(1.0) } else { t2 };
        let unc = next + 1e-15 * terms[0].abs();
        Ok((value, unc))
    }

    /// Run the plan with panels bisected `level` times. `d(x, level)` returns the defect.
    pub fn run<F>(&self, level: u32, mut d: F) -> Result<SingularOutcome>
    where
        F: FnMut(f64, u32) -> Result<f64>,
    {
        let beta = self.beta;
        let (slab, slab_unc) = match self.taylor_exps {
            Some(e) => self.taylor_slab(e, level, &mut d)?,
            None => (0.0, 0.0),
        };

        // body
        let mut breaks = self.breaks.clone();
        for _ in 0..level {
            breaks = quad::bisect_breaks(&breaks);
        }
        let rule = gauss_legendre(self.order);
        let mut body = 0.0;
        let mut fit_x = Vec::new();
        let mut fit_y = Vec::new();
        for w in breaks.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let h = 0.5 * (hi - lo);
            let c = 0.5 * (hi + lo);
            let mut acc = 0.0;
            for (xn, wn) in rule.nodes.iter().zip(&rule.weights) {
                let x = c + h * xn;
                let dv = d(x, level)?;
                acc += wn * x.powf(-1.0 - beta) * dv;
                if x >= self.fit_from {
                    fit_x.push(x);
                    fit_y.push(dv);
                }
            }
            body += acc * h;
        }

        // far tail
        let x_max = *breaks.last().unwrap();
        let tail_of = |exps: &[f64]| -> Option<f64> {
            let c = quad::power_fit(&fit_x, &fit_y, exps)?;
            Some(
                c.iter()
                    .zip(exps)
                    .map(|(ck, &ek)| ck * x_max.powf(ek - beta) / (beta - ek))
                    .sum(),
            )
        };
        let (tail, tail_unc) = if self.tail_exps.is_empty() {
            (0.0, 0.0)
        } else {
            let full = tail_of(&self.tail_exps).ok_or_else(|| Error::Accuracy {
                context: "far-field model fit".into(),
                estimate: f64::INFINITY,
                target: 0.0,
            })?;
            let m = self.tail_exps.len();
            let reduced = if m > 1 { tail_of(&self.tail_exps[..m - 1]).unwrap_or(full) } else { full };
            let d1 = (full - reduced).abs();
            // the omitted term is extrapolated from the decay of the last two fit corrections
            let unc = if m > 2 {
                let d2 = (reduced - tail_of(&self.tail_exps[..m - 2]).unwrap_or(reduced)).abs();
                if d2 > 0.0 {
                    d1 * (d1 / d2).min(1.0)
                } else {
                    d1
                }
            } else {
                d1
            };
            (full, unc)
        };
        Ok(SingularOutcome {
            value: slab + body + tail,
            tail,
            model_uncertainty: slab_unc + tail_unc,
        })
    }

    /// Refine until the nested difference plus model uncertainty meets the target.
    pub fn run_adaptive<F>(&self, cfg: &QuadratureConfig, scale: f64, context: &str, mut d: F) -> Result<Evaluation>
    where
        F: FnMut(f64, u32) -> Result<f64>,
    {
        adapt(cfg, context, |level| {
            let o = self.run(level, &mut d)?;
            Ok(SingularOutcome {
                value: scale * o.value,
                tail: scale * o.tail,
                model_uncertainty: scale * o.model_uncertainty,
            })
        })
    }
}

/// Nested refinement driver: level k is compared with level k − 1.
fn adapt<F>(cfg: &QuadratureConfig, context: &str, mut step: F) -> Result<Evaluation>
where
    F: FnMut(u32) -> Result<SingularOutcome>,
{
    let mut prev = step(0)?;
    let mut last_est = f64::INFINITY;
    for level in 1..=cfg.max_refinements.max(1) {
        let cur = step(level)?;
        let est = (cur.value - prev.value).abs() + cur.model_uncertainty;
        last_est = est;
        if est <= cfg.target(cur.value) {
            return Ok(Evaluation {
                value: cur.value,
                error_estimate: est,
                tail: cur.tail,
            });
        }
        prev = cur;
    }
    Err(Error::Accuracy {
        context: context.to_string(),
        estimate: last_est,
        target: cfg.target(prev.value),
    })
}

/// Graded breakpoints x_j = top·(j/J)^γ kept above `cut`, then geometric doubling to `end`.
fn lag_breaks(cut: f64, top: f64, end: f64, panels: usize, gamma: f64, kinks: &[f64]) -> Vec<f64> {
    let mut b = vec![cut];
    for j in 1..=panels {
        let x = top * (j as f64 / panels as f64).powf(gamma);
        if x > cut * 1.5 {
            b.push(x);
        }
    }
    if *b.last().unwrap() < top {
        b.push(top);
    }
    if end > top {
        let g = quad::geometric_breaks(top, end, 2.0);
        b.extend_from_slice(&g[1..]);
    }
    quad::merge_breaks(&b, kinks.iter().cloned())
}

fn tail_exponents(bound: Bound, smooth_decay: &[f64]) -> Vec<f64> {
    match bound {
        Bound::Sup(_) => {
            let mut v = vec![0.0];
            v.extend_from_slice(smooth_decay);
            v
        }
        Bound::Growth { p, q, .. } => {
            let lead = (p / 2.0).max(q);
            if lead <= 0.0 {
                let mut v = vec![0.0];
                v.extend_from_slice(smooth_decay);
                v
            } else {
                // homogeneous growth of degree 2·lead expands in powers of σ^{-1/2}
                vec![lead, 0.0, lead - 0.5, lead - 1.0, lead - 1.5]
            }
        }
    }
}

fn taylor_exponents(sm: Smoothness, scale_exp: f64) -> [f64; 3] {
    // scale_exp = 1 for lag variables, 2 for radial distances
    match sm {
        Smoothness::Holder { space, time } => {
            let g = (space / 2.0).min(time);
            if g >= 1.0 {
                [scale_exp, 2.0 * scale_exp, 3.0 * scale_exp]
            } else {
                [g * scale_exp, scale_exp, (1.0 + g) * scale_exp]
            }
        }
        Smoothness::Smooth => [scale_exp, 2.0 * scale_exp, 3.0 * scale_exp],
    }
}

pub(crate) fn field_value(u: &ScalarField, x: &[f64], t: f64) -> Result<f64> {
    let v = u.eval(x, t);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::FieldEval {
            at: format!("x = {x:?}, t = {t}"),
            reason: format!("field '{}' returned {v}", u.name),
        })
    }
}

// ---------------------------------------------------------------------------
// Gaussian spatial average

const GAUSS_HALF_WIDTH: f64 = 6.5;
const AXIS_KINK_LEVELS: usize = 24;

/// Symmetric nodes and weights for E[g(W)], W with density e^{-w²}/√π, along one axis.
fn axis_rule(
    xd: f64,
    scale: f64,
    breaks: &[f64],
    flat: Option<(f64, f64)>,
    ell: f64,
    cfg: &QuadratureConfig,
    level: u32,
) -> (Vec<f64>, Vec<f64>) {
    let w_max = GAUSS_HALF_WIDTH;
    let h_base = w_max / cfg.panels_space as f64;
    let active = match flat {
        Some((lo, hi)) => ((xd - lo).abs().max((xd - hi).abs()) / scale).min(w_max),
        None => w_max,
    };
    let h_feat = (ell / scale).min(h_base).max(active / cfg.max_axis_panels as f64);
    let mut half = quad::uniform_breaks(0.0, active.max(1e-300), h_feat);
    if active < w_max {
        let outer = quad::uniform_breaks(active, w_max, h_base);
        half.extend_from_slice(&outer[1..]);
    }
    let mut kinks: Vec<f64> = breaks.iter().map(|b| (xd - b).abs() / scale).collect();
    if let Some((lo, hi)) = flat {
        kinks.push((xd - lo).abs() / scale);
        kinks.push((xd - hi).abs() / scale);
    }
    // geometric grading toward each kink resolves algebraic singularities of the field
    let mut extra = Vec::with_capacity(kinks.len() * (2 * AXIS_KINK_LEVELS + 1));
    for &k in &kinks {
        extra.push(k);
        if k < w_max {
            for j in 1..=AXIS_KINK_LEVELS {
                let off = h_feat * 0.5f64.powi(j as i32);
                extra.push(k - off);
                extra.push(k + off);
            }
        }
    }
    let mut half = quad::merge_breaks(&half, extra);
    for _ in 0..level {
        half = quad::bisect_breaks(&half);
    }
    let rule = gauss_legendre(cfg.gl_order);
    let mut ws = Vec::new();
    let mut wt = Vec::new();
    let norm = 1.0 / PI.sqrt();
    for p in half.windows(2) {
        let h = 0.5 * (p[1] - p[0]);
        let c = 0.5 * (p[1] + p[0]);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let wv = c + h * x;
            let g = w * h * norm * (-wv * wv).exp();
            ws.push(wv);
            wt.push(g);
            ws.push(-wv);
            wt.push(g);
        }
    }
    (ws, wt)
}

/// Largest lag at which the per-axis panel cap still resolves the field's length scale.
fn resolved_lag_limit(u: &ScalarField, cfg: &QuadratureConfig) -> f64 {
    let mut lim = f64::INFINITY;
    for d in 0..u.n() {
        let flat = u.flat_box.as_ref().map(|b| b[d]);
        if flat.is_none() {
            let sq = cfg.max_axis_panels as f64 * u.length_scale / GAUSS_HALF_WIDTH;
            lim = lim.min(0.25 * sq * sq);
        }
    }
    lim
}

/// E[u(x − 2√σ W, τ)].
pub(crate) fn gaussian_average(u: &ScalarField, x: &[f64], tau: f64, sigma: f64, level: u32, cfg: &QuadratureConfig) -> Result<f64> {
    let n = x.len();
    let scale = 2.0 * sigma.sqrt();
    let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
        .map(|d| {
            axis_rule(
                x[d],
                scale,
                &u.space_breaks[d],
                u.flat_box.as_ref().map(|b| b[d]),
                u.length_scale,
                cfg,
                level,
            )
        })
        .collect();
    let mut y = x.to_vec();
    let mut sum = 0.0;
    if n == 1 {
        let (ws, wt) = &rules[0];
        for (w, g) in ws.iter().zip(wt) {
            y[0] = x[0] - scale * w;
            sum += g * field_value(u, &y, tau)?;
        }
        return Ok(sum);
    }
    let mut idx = vec![0usize; n];
    loop {
        let mut g = 1.0;
        for d in 0..n {
            y[d] = x[d] - scale * rules[d].0[idx[d]];
            g *= rules[d].1[idx[d]];
        }
        sum += g * field_value(u, &y, tau)?;
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < rules[d].0.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == n {
                return Ok(sum);
            }
        }
    }
}

fn spatial_break_distance(u: &ScalarField, x: &[f64]) -> f64 {
    let mut m = f64::INFINITY;
    for (d, bs) in u.space_breaks.iter().enumerate() {
        for b in bs {
            m = m.min((x[d] - b).abs());
        }
    }
    m
}

fn check_point(u: &ScalarField, x: &[f64], p: FracParams, cfg: &QuadratureConfig) -> Result<()> {
    cfg.validate()?;
    u.check_admissible(p)?;
    if x.len() != p.n() {
        return Err(Error::Validation(format!("point has length {} but n = {}", x.len(), p.n())));
    }
    Ok(())
}

/// Lag plan for the space–time operator at (x, t).
fn lag_plan(u: &ScalarField, x: &[f64], t: f64, p: FracParams, cfg: &QuadratureConfig) -> SingularPlan {
    let s = p.s();
    let ell = u.length_scale;
    let top = cfg.split_lag * ell * ell;
    let mut cut = cfg.taylor_fraction * top;
    let dist = spatial_break_distance(u, x);
    if dist.is_finite() && dist > 0.0 {
        cut = cut.min(dist * dist / 64.0);
    }
    for &tb in &u.time_breaks {
        if tb < t {
            cut = cut.min((t - tb) / 8.0);
        }
    }
    cut = cut.max(1e-9 * top);
    let end = (cfg.tail.lag_factor * top).min(resolved_lag_limit(u, cfg)).max(4.0 * top);
    let kinks: Vec<f64> = u.time_breaks.iter().filter(|&&tb| tb < t).map(|tb| t - tb).collect();
    let breaks = lag_breaks(cut, top, end, cfg.panels_time, cfg.grade(s), &kinks);
    let half_n = p.n() as f64 / 2.0;
    let decay: Vec<f64> = if u.dependence == Dependence::TimeOnly {
        vec![-1.0, -2.0]
    } else {
        vec![-half_n, -half_n - 1.0]
    };
    SingularPlan {
        beta: s,
        cut,
        taylor_exps: Some(taylor_exponents(u.smoothness, 1.0)),
        slab_weight: Vec::new(),
        fit_from: end / cfg.tail.fit_window,
        breaks,
        tail_exps: tail_exponents(u.bound, &decay),
        order: cfg.gl_order.min(10).max(2),
    }
}

/// (∂t − Δ)^s u(x, t).
pub fn evaluate(u: &ScalarField, x: &[f64], t: f64, p: FracParams, cfg: &QuadratureConfig) -> Result<Evaluation> {
    check_point(u, x, p, cfg)?;
    let u0 = field_value(u, x, t)?;
    let plan = lag_plan(u, x, t, p, cfg);
    let pref = special::semigroup_prefactor(p.s());
    let time_only = u.dependence == Dependence::TimeOnly;
    plan.run_adaptive(cfg, pref, "space-time operator", |sig, level| {
        let avg = if time_only {
            field_value(u, x, t - sig)?
        } else {
            gaussian_average(u, x, t - sig, sig, level, cfg)?
        };
        Ok(u0 - avg)
    })
}

/// Marchaud derivative ∂_t^s u(t) of a space-independent field.
pub fn evaluate_time_only(u: &ScalarField, t: f64, p: FracParams, cfg: &QuadratureConfig) -> Result<Evaluation> {
    cfg.validate()?;
    if u.dependence != Dependence::TimeOnly {
        return Err(Error::Validation(format!("field '{}' is not declared time-only", u.name)));
    }
    u.check_admissible(FracParams::new(u.n(), p.s())?)?;
    let x = vec![0.0; u.n()];
    let u0 = field_value(u, &x, t)?;
    let mut plan = lag_plan(u, &x, t, p, cfg);
    plan.tail_exps = tail_exponents(u.bound, &[-1.0, -2.0]);
    let pref = special::semigroup_prefactor(p.s());
    plan.run_adaptive(cfg, pref, "Marchaud derivative", |sig, _| Ok(u0 - field_value(u, &x, t - sig)?))
}

/// Symmetric sphere rule (directions paired with their negatives), weights summing to 1.
fn sphere_rule(n: usize, count: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    match n {
        1 => Ok(vec![(vec![1.0], 0.5), (vec![-1.0], 0.5)]),
        2 => {
            let m = count.max(8);
            let mut out = Vec::with_capacity(2 * m);
            for k in 0..m {
                let th = PI * (k as f64 + 0.5) / m as f64;
                let w = 0.5 / m as f64;
                out.push((vec![th.cos(), th.sin()], w));
                out.push((vec![-th.cos(), -th.sin()], w));
            }
            Ok(out)
        }
        3 => {
            let m = (count / 2).clamp(4, 64);
            let rule = gauss_legendre(m);
            let az = 2 * m;
            let mut out = Vec::with_capacity(m * az);
            for (mu, wmu) in rule.nodes.iter().zip(&rule.weights) {
                let st = (1.0 - mu * mu).sqrt();
                for k in 0..az {
                    let ph = 2.0 * PI * (k as f64 + 0.5) / az as f64;
                    out.push((vec![st * ph.cos(), st * ph.sin(), *mu], 0.5 * wmu / az as f64));
                }
            }
            Ok(out)
        }
        _ => Err(Error::Domain(format!(
            "space-only evaluation supports n <= 3, got n = {n}"
        ))),
    }
}

/// Q(a, x) above which the radial weight is negligible.
const RADIAL_WEIGHT_CUTOFF: f64 = 46.0;

/// Q(a, ρ²/4σ_c) = 1 − Σ_j (−1)^j (ρ²/4σ_c)^{a+j} / (Γ(a) j! (a+j)) as slab weight pairs.
fn radial_weight_series(a: f64, sigma_c: f64) -> Vec<(f64, f64)> {
    let ga = special::gamma(a).unwrap_or(f64::NAN);
    let mut out = Vec::new();
    let mut fact = 1.0;
    for j in 0..16 {
        let jf = j as f64;
        if j > 0 {
            fact *= jf;
        }
        let sign = if j % 2 == 0 { -1.0 } else { 1.0 };
        let b = sign * (4.0 * sigma_c).powf(-(a + jf)) / (ga * fact * (a + jf));
        out.push((b, 2.0 * (a + jf)));
    }
    out
}

/// (−Δ)^s u(x) of a time-independent field.
///
/// The heat-semigroup lag is split at σ_c. Lags below σ_c are integrated in closed form,
/// leaving a spatial principal-value integral ∫ ρ^{-1-2s} A(ρ) Q(n/2+s, ρ²/4σ_c) dρ over sphere
/// averages A(ρ) = u(x) − ⨍ u(x + ρθ) dθ. Lags above σ_c use Gaussian averages.
pub fn evaluate_space_only(u: &ScalarField, x: &[f64], p: FracParams, cfg: &QuadratureConfig) -> Result<Evaluation> {
    check_point(u, x, p, cfg)?;
    if u.dependence == Dependence::TimeOnly {
        return Err(Error::Validation(format!("field '{}' is time-only", u.name)));
    }
    let n = p.n();
    let s = p.s();
    let nf = n as f64;
    let t = 0.0;
    let u0 = field_value(u, x, t)?;
    let ell = u.length_scale;
    let sigma_c = cfg.split_lag * ell * ell;

    // radial near part
    let top = sigma_c.sqrt();
    let rho_max = 2.0 * (RADIAL_WEIGHT_CUTOFF * sigma_c).sqrt();
    let mut cut = cfg.taylor_fraction.sqrt() * top;
    let mut dists: Vec<f64> = Vec::new();
    for (d, bs) in u.space_breaks.iter().enumerate() {
        for b in bs {
            dists.push((x[d] - b).abs());
        }
    }
    if let Some(bx) = &u.flat_box {
        for (d, &(lo, hi)) in bx.iter().enumerate() {
            dists.push((x[d] - lo).abs());
            dists.push((x[d] - hi).abs());
        }
    }
    for &d in &dists {
        if d > 0.0 {
            cut = cut.min(d / 8.0);
        }
    }
    cut = cut.max(1e-6 * top);
    let mut b = quad::geometric_breaks(cut, top, 2.0);
    let ub = quad::uniform_breaks(top, rho_max, ell.min(top));
    b.extend_from_slice(&ub[1..]);
    let mut kinks = Vec::new();
    for &d in &dists {
        if d > cut && d < rho_max {
            kinks.push(d);
            for k in 1..=40 {
                let f = 0.5f64.powi(k);
                kinks.push(d * (1.0 - f));
                kinks.push(d * (1.0 + f));
            }
        }
    }
    let a = nf / 2.0 + s;
    let near = SingularPlan {
        beta: 2.0 * s,
        cut,
        taylor_exps: Some(taylor_exponents(u.smoothness, 2.0)),
        slab_weight: radial_weight_series(a, sigma_c),
        breaks: quad::merge_breaks(&b, kinks),
        tail_exps: Vec::new(),
        fit_from: f64::INFINITY,
        order: cfg.gl_order,
    };
    let radial_scale = 4f64.powf(s) * special::gamma(a)? / (PI.powf(nf / 2.0) * special::gamma(-s)?.abs())
        * special::sphere_area(n);

    // lag far part
    let end = (cfg.tail.lag_factor * sigma_c).min(resolved_lag_limit(u, cfg)).max(4.0 * sigma_c);
    let far = SingularPlan {
        beta: s,
        cut: sigma_c,
        taylor_exps: None,
        slab_weight: Vec::new(),
        breaks: quad::geometric_breaks(sigma_c, end, 2.0),
        tail_exps: tail_exponents(u.bound, &[-nf / 2.0, -nf / 2.0 - 1.0]),
        fit_from: end / cfg.tail.fit_window,
        order: cfg.gl_order.min(10).max(2),
    };
    let lag_scale = special::semigroup_prefactor(s);

    let mut y = x.to_vec();
    adapt(cfg, "fractional Laplacian", |level| {
        let r = near.run(level, |rho, level| {
            let count = ((8.0 * rho / ell).ceil() as usize).clamp(16, 1024) << level;
            let rule = sphere_rule(n, count)?;
            let mut avg = 0.0;
            for (dir, w) in &rule {
                for d in 0..n {
                    y[d] = x[d] + rho * dir[d];
                }
                avg += w * field_value(u, &y, t)?;
            }
            Ok((u0 - avg) * puruspe::gammq(a, rho * rho / (4.0 * sigma_c)))
        })?;
        let f = far.run(level, |sig, level| Ok(u0 - gaussian_average(u, x, t, sig, level, cfg)?))?;
        Ok(SingularOutcome {
            value: radial_scale * r.value + lag_scale * f.value,
            tail: lag_scale * f.tail,
            model_uncertainty: radial_scale * r.model_uncertainty + lag_scale * f.model_uncertainty,
        })
    })
}

/// |evaluate(u; s) − target| along a list of orders.
pub fn local_limit_probe(
    u: &ScalarField,
    x: &[f64],
    t: f64,
    target: f64,
    s_grid: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<f64>> {
    s_grid
        .iter()
        .map(|&s| {
            let p = FracParams::new(u.n(), s)?;
            Ok((evaluate(u, x, t, p, cfg)?.value - target).abs())
        })
        .collect()
}

/// Reference cutoff: 1 on {|y| ≤ 1/2, |τ| ≤ 1/2}, 0 outside {|y| < 1, |τ| < 1}, C² smoothstep between.
pub fn reference_cutoff(n: usize) -> ScalarField {
    use crate::field::smoothstep;
    let prof = |r: f64| 1.0 - smoothstep(2.0 * r - 1.0);
    let mut f = ScalarField::new(n, move |x, t| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        prof(r) * prof(t.abs())
    })
    .bounded(1.0)
    .length_scale(0.25)
    .flat_outside(vec![(-1.0, 1.0); n])
    .with_time_breaks(vec![-1.0, -0.5, 0.5, 1.0])
    .named("reference_cutoff");
    if n == 1 {
        f = f.with_space_breaks(0, vec![-1.0, -0.5, 0.5, 1.0]);
    }
    f
}

/// η_r(x, t) = η((x − x0)/r, (t − t0)/r²).
pub fn scaled_cutoff(n: usize, r: f64, x0: &[f64], t0: f64) -> ScalarField {
    reference_cutoff(n).dilated(r).translated(x0, t0)
}

/// Sample offsets (in reference units) used by the cutoff scaling check, kept off the C² kinks at ±1/2.
pub fn cutoff_sample_offsets() -> Vec<(f64, f64)> {
    let xs = [-0.8, -0.65, -0.4, -0.2, 0.0, 0.2, 0.4, 0.65, 0.8];
    let ts = [-0.8, -0.65, -0.4, -0.2, 0.0, 0.2, 0.4, 0.65, 0.8];
    let mut out = Vec::new();
    for &a in &xs {
        for &b in &ts {
            out.push((a, b));
        }
    }
    out
}

/// r^{2s} · max |(∂t − Δ)^s η_r| over samples inside B_r(x0) × (t0 − r², t0 + r²).
pub fn cutoff_bound_check(r: f64, x0: &[f64], t0: f64, p: FracParams, cfg: &QuadratureConfig) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("cutoff radius must be positive, got {r}")));
    }
    let eta = scaled_cutoff(p.n(), r, x0, t0);
    let mut best: f64 = 0.0;
    for (a, b) in cutoff_sample_offsets() {
        let mut x = x0.to_vec();
        x[0] += a * r;
        let v = evaluate(&eta, &x, t0 + b * r * r, p, cfg)?;
        best = best.max(v.value.abs());
    }
    Ok(best * r.powf(2.0 * p.s()))
}

/// Piecewise polynomial on the line: Σ c_k y^k on each [lo, hi], zero elsewhere.
///
/// Its Gaussian averages have closed forms through the truncated Gaussian moments.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePoly {
    /// (lo, hi, coefficients in powers of y); lo may be −∞ and hi +∞ for constant pieces.
    pub pieces: Vec<(f64, f64, Vec<f64>)>,
}

impl PiecewisePoly {
    pub fn eval(&self, y: f64) -> f64 {
        for (lo, hi, c) in &self.pieces {
            if y >= *lo && y <= *hi {
                return c.iter().rev().fold(0.0, |acc, ck| acc * y + ck);
            }
        }
        0.0
    }

    /// ∫ P(y) G_σ(y − x) dy with G_σ(z) = (4πσ)^{-1/2} e^{-z²/4σ}.
    pub fn gaussian_average(&self, x: f64, sigma: f64) -> f64 {
        let r = 2.0 * sigma.sqrt();
        let g = |z: f64| if z.is_finite() { (-(z * z) / (r * r)).exp() / (PI.sqrt() * r) } else { 0.0 };
        let mut total = 0.0;
        for (lo, hi, c) in &self.pieces {
            let (p, q) = (lo - x, hi - x);
            if !(q > p) || c.is_empty() {
                continue;
            }
            if p > 40.0 * r || q < -40.0 * r {
                continue;
            }
            // coefficients of the polynomial in z = y − x
            let deg = c.len() - 1;
            let mut d = vec![0.0; deg + 1];
            for (k, ck) in c.iter().enumerate() {
                let mut binom = 1.0;
                for j in 0..=k {
                    d[j] += ck * binom * x.powi((k - j) as i32);
                    binom = binom * (k - j) as f64 / (j + 1) as f64;
                }
            }
            let (a, b) = (p.max(-40.0 * r), q.min(40.0 * r));
            if b - a <= 4.0 * r {
                // narrow pieces: the moment recurrence cancels, the integrand is smooth on two panels
                let rule = gauss_legendre(20);
                let half = 0.25 * (b - a);
                for mid in [a + half, b - half] {
                    for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                        let z = mid + half * t;
                        total += w * half * g(z) * d.iter().rev().fold(0.0, |acc, dk| acc * z + dk);
                    }
                }
                continue;
            }
            // M_k = ∫_p^q z^k G_σ, M_k = 2σ[(k − 1) M_{k−2} + p^{k−1} g(p) − q^{k−1} g(q)]
            let (m0, m1) = crate::lattice::gauss_moments(p, q, sigma);
            let edge = |z: f64, k: usize| if z.is_finite() { z.powi(k as i32) * g(z) } else { 0.0 };
            let mut m = vec![m0, m1];
            for k in 2..=deg {
                let v = 2.0 * sigma * ((k - 1) as f64 * m[k - 2] + edge(p, k - 1) - edge(q, k - 1));
                m.push(v);
            }
            total += d.iter().zip(&m).map(|(a, b)| a * b).sum::<f64>();
        }
        total
    }
}

/// Operator values of u(x, t) = X(x)·T(t) (n = 1) on a tensor grid.
///
/// `x_part` must be space-only and `t_part` time-only; returns values indexed [i][j] for xs[i], ts[j].
pub fn evaluate_separable_grid(
    x_part: &ScalarField,
    t_part: &ScalarField,
    xs: &[f64],
    ts: &[f64],
    p: FracParams,
    cfg: &QuadratureConfig,
) -> Result<Vec<Vec<Evaluation>>> {
    let avg = |x: f64, sig: f64, level: u32| gaussian_average(x_part, &[x], 0.0, sig, level, cfg);
    evaluate_separable_grid_with(x_part, &avg, t_part, xs, ts, p, cfg)
}

/// As `evaluate_separable_grid`, with the spatial averages E[X(x − 2√σ W)] supplied by `avg(x, σ, level)`.
///
/// Each (x, t) gets its own lag plan, with breakpoints at the lags where t − σ meets a time break of T.
pub fn evaluate_separable_grid_with<A>(
    x_part: &ScalarField,
    avg: &A,
    t_part: &ScalarField,
    xs: &[f64],
    ts: &[f64],
    p: FracParams,
    cfg: &QuadratureConfig,
) -> Result<Vec<Vec<Evaluation>>>
where
    A: Fn(f64, f64, u32) -> Result<f64> + Sync,
{
    use rayon::prelude::*;
    cfg.validate()?;
    if p.n() != 1 || x_part.n() != 1 {
        return Err(Error::Validation("separable grid evaluation is one-dimensional".into()));
    }
    let s = p.s();
    let ell = x_part.length_scale.min(t_part.length_scale);
    let top = cfg.split_lag * ell * ell;
    let mut xf = x_part.clone();
    xf.length_scale = ell;
    let end = (cfg.tail.lag_factor * top).min(resolved_lag_limit(&xf, cfg)).max(4.0 * top);
    let bound = match (x_part.bound, t_part.bound) {
        (Bound::Sup(a), Bound::Sup(b)) => Bound::Sup(a * b),
        _ => Bound::Growth { a: 1.0, p: 0.0, q: 0.0 },
    };
    let tail_exps = tail_exponents(bound, &[-0.5, -1.5]);
    let pref = special::semigroup_prefactor(s);
    let tvals: Vec<f64> = ts.iter().map(|&t| t_part.eval(&[], t)).collect();

    xs.par_iter()
        .map(|&x| -> Result<Vec<Evaluation>> {
            let x0 = field_value(x_part, &[x], 0.0)?;
            let mut cut_x = cfg.taylor_fraction * top;
            let d = spatial_break_distance(x_part, &[x]);
            if d.is_finite() && d > 0.0 {
                cut_x = cut_x.min(d * d / 64.0);
            }
            ts.iter()
                .zip(&tvals)
                .map(|(&t, &tv)| {
                    let mut cut = cut_x;
                    let mut kinks = Vec::new();
                    for &tb in &t_part.time_breaks {
                        if tb < t {
                            cut = cut.min((t - tb) / 8.0);
                            kinks.push(t - tb);
                        }
                    }
                    let cut = cut.max(1e-9 * top);
                    let plan = SingularPlan {
                        beta: s,
                        cut,
                        taylor_exps: Some([1.0, 2.0, 3.0]),
                        slab_weight: Vec::new(),
                        fit_from: end / cfg.tail.fit_window,
                        breaks: lag_breaks(cut, top, end, cfg.panels_time, cfg.grade(s), &kinks),
                        tail_exps: tail_exps.clone(),
                        order: cfg.gl_order.min(10).max(2),
                    };
                    let u0 = x0 * tv;
                    let defect = |sig: f64, level: u32| Ok(u0 - t_part.eval(&[], t - sig) * avg(x, sig, level)?);
                    plan.run_adaptive(cfg, pref, &format!("separable grid at x = {x}, t = {t}"), defect)
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation_names_field() {
        let cfg = QuadratureConfig {
            rel_tol: -1.0,
            ..Default::default()
        };
        let e = cfg.validate().unwrap_err();
        assert!(format!("{e}").contains("rel_tol"));
    }

    #[test]
    fn axis_rule_is_symmetric_and_normalized() {
        let cfg = QuadratureConfig::default();
        let (ws, wt) = axis_rule(0.3, 0.7, &[0.0, 1.0], None, 0.5, &cfg, 0);
        let total: f64 = wt.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        for pair in ws.chunks(2) {
            assert_eq!(pair[0], -pair[1]);
        }
    }
}
