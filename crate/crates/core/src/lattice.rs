//! Space–time lattice form of the operator.
//!
//! Nodes sit at x_j = lo + j·h (j = 0..=cells) along the last axis and at t_k = t0 + k·Δt.
//! Nodes j = 0 and j = cells lie on the boundary and carry exterior data; level 0 carries
//! history data. In two dimensions the first axis is periodic. The sampled field is
//! interpolated by full space–time hats, so the lattice weights depend only on node offsets
//! and are nonnegative. The box |z_d| < h_d, σ < Δt around the singularity uses a Taylor model
//! instead: a backward difference in time and centred second differences in space. The part of
//! space–time the hats do not cover is weighted by 1 − χ and integrated against modal data.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::operator::SingularPlan;
use crate::quad::{self, gauss_legendre};
use crate::special::{self, erf, erfc, FracParams};
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Gaussian support in units of √σ: e^{-13²/4} ≈ 5e-19.
const WINDOW: f64 = 13.0;
/// Lags of the far history integral run to this multiple of the last lattice lag.
const FAR_LAG_FACTOR: f64 = 16_777_216.0;

pub type ProfileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One-dimensional factor of a separable data mode.
#[derive(Clone)]
pub enum AxisProfile {
    Const,
    /// cos(ξ y + φ).
    Cosine { xi: f64, phase: f64 },
    /// f on [lo, hi], `left` below and `right` above; `scale` is the feature width of f.
    Profile {
        f: ProfileFn,
        lo: f64,
        hi: f64,
        left: f64,
        right: f64,
        scale: f64,
    },
}

impl fmt::Debug for AxisProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisProfile::Const => write!(f, "Const"),
            AxisProfile::Cosine { xi, phase } => write!(f, "Cosine {{ xi: {xi}, phase: {phase} }}"),
            AxisProfile::Profile { lo, hi, left, right, scale, .. } => write!(
                f,
                "Profile {{ lo: {lo}, hi: {hi}, left: {left}, right: {right}, scale: {scale} }}"
            ),
        }
    }
}

impl AxisProfile {
    /// f on [lo, hi], extended by its end values.
    pub fn profile<F>(f: F, lo: f64, hi: f64, scale: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let (left, right) = (f(lo), f(hi));
        AxisProfile::Profile { f: Arc::new(f), lo, hi, left, right, scale }
    }

    /// `left` below `at`, `right` from `at` on.
    pub fn step(at: f64, left: f64, right: f64) -> Self {
        AxisProfile::Profile {
            f: Arc::new(move |y| if y < at { left } else { right }),
            lo: at,
            hi: at,
            left,
            right,
            scale: 1.0,
        }
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self {
            AxisProfile::Const => 1.0,
            AxisProfile::Cosine { xi, phase } => (xi * y + phase).cos(),
            AxisProfile::Profile { f, lo, hi, left, right, .. } => {
                if y < *lo {
                    *left
                } else if y > *hi {
                    *right
                } else {
                    f(y)
                }
            }
        }
    }

    /// ∫ a(y) G_σ(y − x) dy over the whole line.
    pub fn full(&self, x: f64, sigma: f64) -> f64 {
        match self {
            AxisProfile::Const => 1.0,
            AxisProfile::Cosine { xi, phase } => (-xi * xi * sigma).exp() * (xi * x + phase).cos(),
            AxisProfile::Profile { .. } => self.moments(x, sigma, f64::NEG_INFINITY, f64::INFINITY).0,
        }
    }

    /// (∫_p^q a(y) G_σ(y − x) dy, ∫_p^q (y − x) a(y) G_σ(y − x) dy).
    pub fn moments(&self, x: f64, sigma: f64, p: f64, q: f64) -> (f64, f64) {
        if !(q > p) {
            return (0.0, 0.0);
        }
        match self {
            AxisProfile::Const => gauss_moments(p - x, q - x, sigma),
            AxisProfile::Cosine { xi, phase } => {
                let width = if *xi == 0.0 { f64::INFINITY } else { 2.0 / xi.abs() };
                numeric_moments(|y| (xi * y + phase).cos(), x, sigma, p, q, width)
            }
            AxisProfile::Profile { f, lo, hi, left, right, scale } => {
                let mut m = (0.0, 0.0);
                let mut add = |v: (f64, f64), c: f64| {
                    m.0 += c * v.0;
                    m.1 += c * v.1;
                };
                let (a, b) = (p, q.min(*lo));
                if b > a && *left != 0.0 {
                    add(gauss_moments(a - x, b - x, sigma), *left);
                }
                let (a, b) = (p.max(*hi), q);
                if b > a && *right != 0.0 {
                    add(gauss_moments(a - x, b - x, sigma), *right);
                }
                let (a, b) = (p.max(*lo), q.min(*hi));
                if b > a {
                    add(numeric_moments(|y| f(y), x, sigma, a, b, *scale), 1.0);
                }
                m
            }
        }
    }
}

/// ∫_p^q G_σ(z) dz and ∫_p^q z G_σ(z) dz with G_σ(z) = (4πσ)^{-1/2} e^{-z²/4σ}.
pub fn gauss_moments(p: f64, q: f64, sigma: f64) -> (f64, f64) {
    let r = 2.0 * sigma.sqrt();
    let m0 = if p >= 0.0 {
        0.5 * (erfc(p / r) - erfc(q / r))
    } else if q <= 0.0 {
        0.5 * (erfc(-q / r) - erfc(-p / r))
    } else {
        0.5 * (erf(q / r) - erf(p / r))
    };
    let g = |z: f64| if z.is_finite() { (-(z * z) / (r * r)).exp() / (PI.sqrt() * r) } else { 0.0 };
    (m0, 2.0 * sigma * (g(p) - g(q)))
}

fn numeric_moments<G: Fn(f64) -> f64>(g: G, x: f64, sigma: f64, p: f64, q: f64, width: f64) -> (f64, f64) {
    let r = sigma.sqrt();
    let a = p.max(x - WINDOW * r);
    let b = q.min(x + WINDOW * r);
    if !(b > a) {
        return (0.0, 0.0);
    }
    let hmax = (1.5 * r).min(width);
    let count = ((b - a) / hmax).ceil().max(1.0) as usize;
    let rule = gauss_legendre(10);
    let norm = 1.0 / (2.0 * (PI * sigma).sqrt());
    let step = (b - a) / count as f64;
    let (mut m0, mut m1) = (0.0, 0.0);
    for c in 0..count {
        let half = 0.5 * step;
        let mid = a + c as f64 * step + half;
        for (t, w) in rule.nodes.iter().zip(&rule.weights) {
            let y = mid + half * t;
            let z = y - x;
            let v = w * half * norm * (-z * z / (4.0 * sigma)).exp() * g(y);
            m0 += v;
            m1 += z * v;
        }
    }
    (m0, m1)
}

/// coef · e^{λt} · Π_d a_d(x_d).
#[derive(Clone, Debug)]
pub struct Mode {
    pub coef: f64,
    pub lambda: f64,
    pub axes: Vec<AxisProfile>,
}

impl Mode {
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.coef * (self.lambda * t).exp() * self.axes.iter().zip(x).map(|(a, &y)| a.eval(y)).product::<f64>()
    }
}

/// Sum of separable modes: the form exterior and history data take on the lattice.
#[derive(Clone, Debug)]
pub struct ModalField {
    n: usize,
    modes: Vec<Mode>,
}

impl ModalField {
    pub fn new(n: usize, modes: Vec<Mode>) -> Result<Self> {
        for m in &modes {
            if m.axes.len() != n {
                return Err(Error::Validation(format!("mode has {} axes, expected {n}", m.axes.len())));
            }
            if !(m.coef.is_finite() && m.lambda.is_finite()) {
                return Err(Error::Validation("mode coefficients must be finite".into()));
            }
        }
        Ok(Self { n, modes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self { n, modes: vec![Mode { coef: c, lambda: 0.0, axes: vec![AxisProfile::Const; n] }] }
    }

    /// e^{λt} cos(ξ·x), expanded into separable modes.
    pub fn exp_cos(lambda: f64, xi: &[f64]) -> Self {
        // real and imaginary parts of Π_d e^{i ξ_d x_d}
        let mut re: Vec<(f64, Vec<AxisProfile>)> = vec![(1.0, Vec::new())];
        let mut im: Vec<(f64, Vec<AxisProfile>)> = Vec::new();
        for &k in xi {
            let (c, s) = if k == 0.0 {
                (AxisProfile::Const, None)
            } else {
                (
                    AxisProfile::Cosine { xi: k, phase: 0.0 },
                    Some(AxisProfile::Cosine { xi: k, phase: -0.5 * PI }),
                )
            };
            let ext = |v: &[(f64, Vec<AxisProfile>)], a: &AxisProfile, sign: f64| -> Vec<(f64, Vec<AxisProfile>)> {
                v.iter()
                    .map(|(co, ax)| {
                        let mut ax = ax.clone();
                        ax.push(a.clone());
                        (sign * co, ax)
                    })
                    .collect()
            };
            let mut nre = ext(&re, &c, 1.0);
            let mut nim = ext(&im, &c, 1.0);
            if let Some(s) = &s {
                nre.extend(ext(&im, s, -1.0));
                nim.extend(ext(&re, s, 1.0));
            }
            re = nre;
            im = nim;
        }
        Self {
            n: xi.len(),
            modes: re.into_iter().map(|(coef, axes)| Mode { coef, lambda, axes }).collect(),
        }
    }

    /// coef · e^{λt} · a(x_n), constant along the other axes.
    pub fn along_normal(n: usize, profile: AxisProfile, coef: f64, lambda: f64) -> Self {
        let mut axes = vec![AxisProfile::Const; n];
        axes[n - 1] = profile;
        Self { n, modes: vec![Mode { coef, lambda, axes }] }
    }

    pub fn plus(mut self, other: ModalField) -> Self {
        self.modes.extend(other.modes);
        self
    }

    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.modes.iter().map(|m| m.eval(x, t)).sum()
    }

    pub fn to_field(&self) -> ScalarField {
        let me = self.clone();
        ScalarField::new(self.n, move |x, t| me.eval(x, t)).named("modal data")
    }
}

/// Node layout in space and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
    /// Periodic first axis (period, nodes) for two-dimensional lattices.
    pub periodic: Option<(f64, usize)>,
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
}

impl Lattice {
    pub fn one_d(lo: f64, hi: f64, cells: usize, t0: f64, t1: f64, steps: usize) -> Self {
        Self { lo, hi, cells, periodic: None, t0, t1, steps }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hi > self.lo && self.lo.is_finite() && self.hi.is_finite()) {
            return Err(Error::Validation(format!("bad spatial interval [{}, {}]", self.lo, self.hi)));
        }
        if self.cells < 2 {
            return Err(Error::Validation("lattice needs at least two cells".into()));
        }
        if !(self.t1 > self.t0 && self.t0.is_finite() && self.t1.is_finite()) || self.steps == 0 {
            return Err(Error::Validation(format!("bad time range [{}, {}] / {} steps", self.t0, self.t1, self.steps)));
        }
        if let Some((period, m)) = self.periodic {
            if !(period > 0.0 && period.is_finite()) || m < 4 {
                return Err(Error::Validation("periodic axis needs a positive period and at least 4 nodes".into()));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        if self.periodic.is_some() {
            2
        } else {
            1
        }
    }

    pub fn h(&self) -> f64 {
        (self.hi - self.lo) / self.cells as f64
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.steps as f64
    }

    /// Nodes along the periodic axis (1 in one dimension).
    pub fn rows(&self) -> usize {
        self.periodic.map_or(1, |p| p.1)
    }

    /// Nodes along the last axis, boundary included.
    pub fn cols(&self) -> usize {
        self.cells + 1
    }

    pub fn len(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hp(&self) -> f64 {
        self.periodic.map_or(1.0, |(period, m)| period / m as f64)
    }

    pub fn x_n(&self, j: usize) -> f64 {
        if j == self.cells {
            self.hi
        } else {
            self.lo + j as f64 * self.h()
        }
    }

    pub fn x_p(&self, i: usize) -> f64 {
        i as f64 * self.hp()
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t1
        } else {
            self.t0 + k as f64 * self.dt()
        }
    }

    /// Coordinates of node (i, j): row i along the periodic axis, column j along x_n.
    pub fn point(&self, i: usize, j: usize) -> Vec<f64> {
        if self.periodic.is_some() {
            vec![self.x_p(i), self.x_n(j)]
        } else {
            vec![self.x_n(j)]
        }
    }

    pub fn is_boundary(&self, j: usize) -> bool {
        j == 0 || j == self.cells
    }

    /// Sample a modal field on level k.
    pub fn sample(&self, f: &ModalField, k: usize) -> Vec<f64> {
        let t = self.t(k);
        let mut out = vec![0.0; self.len()];
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out[i * self.cols() + j] = f.eval(&self.point(i, j), t);
            }
        }
        out
    }
}

/// ∫ hat(z − c) G_σ(z) dz for the hat of half-width h centred at c.
fn hat_one(c: f64, h: f64, sigma: f64) -> f64 {
    let (l0, l1) = gauss_moments(c - h, c, sigma);
    let (r0, r1) = gauss_moments(c, c + h, sigma);
    ((l1 - (c - h) * l0) + ((c + h) * r0 - r1)) / h
}

/// Hat averages for offsets 0..=amax, plus the parts of offsets 0 and 1 inside |z| < h
/// and the part of offset 1 outside it.
fn hat_table(h: f64, sigma: f64, amax: usize) -> (Vec<f64>, [f64; 2], f64) {
    let r = WINDOW * sigma.sqrt() + h;
    let mut g = vec![0.0; amax + 1];
    for (a, v) in g.iter_mut().enumerate() {
        let c = a as f64 * h;
        if c - h > r {
            break;
        }
        *v = hat_one(c, h, sigma);
    }
    let (_, i1) = gauss_moments(0.0, h, sigma);
    let (o0, o1) = gauss_moments(h, 2.0 * h, sigma);
    let inside = [g[0], i1 / h];
    (g, inside, (2.0 * h * o0 - o1) / h)
}

/// Periodic hat averages Σ_j hat(a h + j H) for a = 0..m, and the image-only part (j ≠ 0) for a = 0, 1.
fn periodic_hat_table(h: f64, m: usize, sigma: f64) -> (Vec<f64>, [f64; 2]) {
    let period = h * m as f64;
    let reach = WINDOW * sigma.sqrt() + h;
    if reach < 4.0 * period {
        let jmax = (reach / period).ceil() as i64 + 1;
        let mut g = vec![0.0; m];
        let mut images = [0.0; 2];
        for (a, v) in g.iter_mut().enumerate() {
            for j in -jmax..=jmax {
                let c = a as f64 * h + j as f64 * period;
                if c.abs() - h > reach {
                    continue;
                }
                let w = hat_one(c, h, sigma);
                *v += w;
                if j != 0 && a < 2 {
                    images[a] += w;
                }
            }
        }
        (g, images)
    } else {
        let kmax = (period * (42.0 / sigma).sqrt() / (2.0 * PI)).ceil() as i64 + 1;
        let g: Vec<f64> = (0..m)
            .map(|a| {
                let mut acc = 1.0;
                for k in 1..=kmax {
                    let x = PI * k as f64 / m as f64;
                    let sinc2 = (x.sin() / x).powi(2);
                    let om = 2.0 * PI * k as f64 / period;
                    acc += 2.0 * sinc2 * (-sigma * om * om).exp() * (2.0 * PI * (k * a as i64) as f64 / m as f64).cos();
                }
                acc / m as f64
            })
            .collect();
        let images = [g[0] - hat_one(0.0, h, sigma), g[1] - hat_one(h, h, sigma)];
        (g, images)
    }
}

/// Quadrature nodes on lag segment [mΔt, (m+1)Δt]; the first one is graded towards 0.
fn segment_nodes(m: usize, dt: f64, hmin: f64) -> (Vec<f64>, Vec<f64>) {
    let rule = gauss_legendre(10);
    let (mut xs, mut ws) = (Vec::new(), Vec::new());
    let (a, b) = (m as f64 * dt, (m + 1) as f64 * dt);
    if m == 0 {
        let lo = (hmin * hmin / 400.0).min(0.5 * dt);
        for w in quad::geometric_breaks(lo, dt, 2.0).windows(2) {
            quad::push_panel(rule, w[0], w[1], &mut xs, &mut ws);
        }
    } else {
        quad::push_panel(rule, a, b, &mut xs, &mut ws);
    }
    (xs, ws)
}

/// Nonnegative space–time weights with the Taylor box folded in.
///
/// `w[b]` is the weight of a full hat at lag b and `first[b]` the part from lags below bΔt, used for
/// level 0 whose hats stop at t0. `ramp[b][a'·(cells + 1) + d]` is the part of a boundary hat lying
/// outside [lo, hi] seen from distance d; it is removed so the lattice stops sharply at the boundary.
#[derive(Debug, Clone)]
pub struct LatticeWeights {
    rows: usize,
    cells: usize,
    /// w[b][a' · (2 cells + 1) + a + cells]; the self weight at lag 0 is removed.
    w: Vec<Vec<f64>>,
    first: Vec<Vec<f64>>,
    ramp: Vec<Vec<f64>>,
    ramp_first: Vec<Vec<f64>>,
    /// Weight of the periodic images of the node itself at lag 0 (removed from the table).
    pub self_weight: f64,
    /// Taylor coefficient of ∂t on the singular box.
    pub taylor_time: f64,
    /// Taylor coefficients of −∂²_d on the singular box (periodic axis first).
    pub taylor_space: Vec<f64>,
    /// Kernel mass outside the singular box.
    pub mass_outside_box: f64,
}

struct SegmentPart {
    down: Vec<f64>,
    up: Vec<f64>,
    rdown: Vec<f64>,
    rup: Vec<f64>,
}

impl LatticeWeights {
    pub fn new(lat: &Lattice, p: FracParams) -> Result<Self> {
        lat.validate()?;
        if p.n() != lat.n() {
            return Err(Error::Validation(format!("lattice is {}-dimensional but n = {}", lat.n(), p.n())));
        }
        let s = p.s();
        let pref = special::semigroup_prefactor(s);
        let (h, dt, rows, cells, hp) = (lat.h(), lat.dt(), lat.rows(), lat.cells, lat.hp());
        let hmin = if rows > 1 { h.min(hp) } else { h };
        let width = 2 * cells + 1;
        let rw = cells + 1;
        let steps = lat.steps;

        // per-segment contributions, summed into lags m (falling hat side) and m + 1 (rising side)
        let seg: Vec<SegmentPart> = (0..=steps)
            .into_par_iter()
            .map(|m| {
                let (xs, ws) = segment_nodes(m, dt, hmin);
                let a0 = m as f64 * dt;
                let mut part = SegmentPart {
                    down: vec![0.0; rows * width],
                    up: vec![0.0; rows * width],
                    rdown: vec![0.0; rows * rw],
                    rup: vec![0.0; rows * rw],
                };
                for (&sig, &wq) in xs.iter().zip(&ws) {
                    let (gn, _, gnx) = hat_table(h, sig, cells);
                    let (gp, gpx) = if rows > 1 { periodic_hat_table(hp, rows, sig) } else { (vec![1.0], [0.0; 2]) };
                    // primary-image inside parts and outside parts along the periodic axis
                    let (gpb, gpx) = if rows > 1 {
                        let (_, inside, out1) = hat_table(hp, sig, 1);
                        (inside, [gpx[0], gpx[1] + out1])
                    } else {
                        ([1.0, 0.0], [0.0, 0.0])
                    };
                    // outer half of a boundary hat seen from distance d
                    let reach = WINDOW * sig.sqrt() + h;
                    let mut rd = vec![0.0; rw];
                    for (d, v) in rd.iter_mut().enumerate().skip(1) {
                        if d as f64 * h > reach {
                            break;
                        }
                        let (m0, m1) = gauss_moments(-((d + 1) as f64) * h, -(d as f64) * h, sig);
                        *v = (((d + 1) as f64) * h * m0 + m1) / h;
                    }
                    let base = wq * pref * sig.powf(-1.0 - s);
                    let lam = (sig - a0) / dt;
                    let (fd, fu) = (base * (1.0 - lam), base * lam);
                    for ap in 0..rows {
                        let gpa = gp[ap];
                        if gpa == 0.0 {
                            continue;
                        }
                        let row = ap * width;
                        for a in 0..=cells {
                            let v = gpa * gn[a];
                            if v == 0.0 {
                                break;
                            }
                            part.down[row + cells + a] += fd * v;
                            part.up[row + cells + a] += fu * v;
                            if a > 0 {
                                part.down[row + cells - a] += fd * v;
                                part.up[row + cells - a] += fu * v;
                            }
                        }
                        for d in 1..rw {
                            let v = gpa * rd[d];
                            if v == 0.0 {
                                break;
                            }
                            part.rdown[ap * rw + d] += fd * v;
                            part.rup[ap * rw + d] += fu * v;
                        }
                    }
                    if m == 0 {
                        // remove the box |z| < h: outside part = images · g + primary · (g − inside)
                        let pa = |ap: usize| -> Option<usize> {
                            if ap == 0 {
                                Some(0)
                            } else if rows > 1 && (ap == 1 || ap == rows - 1) {
                                Some(1)
                            } else {
                                None
                            }
                        };
                        for ap in 0..rows {
                            let Some(q) = pa(ap) else { continue };
                            for a in [-1i64, 0, 1] {
                                let aa = a.unsigned_abs() as usize;
                                let full = gp[ap] * gn[aa];
                                let outside_n = if aa == 0 { 0.0 } else { gnx };
                                let outside = gpx[q] * gn[aa] + gpb[q] * outside_n;
                                let idx = ap * width + (cells as i64 + a) as usize;
                                part.down[idx] += fd * (outside - full);
                                part.up[idx] += fu * (outside - full);
                            }
                        }
                    }
                }
                part
            })
            .collect();
        let mut w = vec![vec![0.0; rows * width]; steps + 1];
        let mut first = vec![vec![0.0; rows * width]; steps + 1];
        let mut ramp = vec![vec![0.0; rows * rw]; steps + 1];
        let mut ramp_first = vec![vec![0.0; rows * rw]; steps + 1];
        let add = |dst: &mut Vec<f64>, src: &[f64]| {
            for (x, v) in dst.iter_mut().zip(src) {
                *x += v;
            }
        };
        for (m, part) in seg.into_iter().enumerate() {
            add(&mut w[m], &part.down);
            add(&mut ramp[m], &part.rdown);
            if m < steps {
                add(&mut w[m + 1], &part.up);
                add(&mut first[m + 1], &part.up);
                add(&mut ramp[m + 1], &part.rup);
                add(&mut ramp_first[m + 1], &part.rup);
            }
        }
        for x in w.iter_mut().chain(first.iter_mut()).flatten() {
            *x = x.max(0.0);
        }

        // Taylor box coefficients and the kernel mass outside the box
        let axes: Vec<f64> = if rows > 1 { vec![hp, h] } else { vec![h] };
        let (taylor_time, taylor_space, box_mass) = taylor_box(&axes, dt, s);
        let taylor_space: Vec<f64> = taylor_space.iter().map(|v| pref * v).collect();
        let taylor_time = pref * taylor_time;
        let mass_outside_box = pref * (box_mass + dt.powf(-s) / s);

        w[1][cells] += taylor_time / dt;
        first[1][cells] += taylor_time / dt;
        let an = *taylor_space.last().unwrap();
        w[0][cells - 1] += an / (h * h);
        w[0][cells + 1] += an / (h * h);
        if rows > 1 {
            let ap = taylor_space[0] / (hp * hp);
            w[0][width + cells] += ap;
            w[0][(rows - 1) * width + cells] += ap;
        }
        let self_weight = w[0][cells];
        w[0][cells] = 0.0;
        Ok(Self {
            rows,
            cells,
            w,
            first,
            ramp,
            ramp_first,
            self_weight,
            taylor_time,
            taylor_space,
            mass_outside_box,
        })
    }

    pub fn lags(&self) -> usize {
        self.w.len()
    }

    /// W at periodic offset a' (mod rows), offset a along x_n and lag b.
    pub fn get(&self, ap: usize, a: i64, b: usize) -> f64 {
        let width = 2 * self.cells + 1;
        self.w[b][(ap % self.rows) * width + (self.cells as i64 + a) as usize]
    }

    /// Outer half of a boundary hat at periodic offset a', distance d and lag b.
    pub fn ramp(&self, ap: usize, d: usize, b: usize) -> f64 {
        self.ramp[b][(ap % self.rows) * (self.cells + 1) + d]
    }

    pub fn min_weight(&self) -> f64 {
        self.w
            .iter()
            .chain(&self.first)
            .chain(&self.ramp)
            .chain(&self.ramp_first)
            .flatten()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Σ over columns 0..=cells and all rows of the weight seen from column j, ramps removed.
    fn row_sums(&self, table: &[f64], ramp: &[f64]) -> Vec<f64> {
        let width = 2 * self.cells + 1;
        let rw = self.cells + 1;
        let mut col = vec![0.0; width];
        let mut rcol = vec![0.0; rw];
        for ap in 0..self.rows {
            for (c, v) in col.iter_mut().zip(&table[ap * width..(ap + 1) * width]) {
                *c += v;
            }
            for (c, v) in rcol.iter_mut().zip(&ramp[ap * rw..(ap + 1) * rw]) {
                *c += v;
            }
        }
        let mut pre = vec![0.0; width + 1];
        for i in 0..width {
            pre[i + 1] = pre[i] + col[i];
        }
        // offsets j − j' for j' in 0..=cells sit at indices j..=j + cells
        (0..=self.cells)
            .map(|j| pre[j + self.cells + 1] - pre[j] - rcol[j] - rcol[self.cells - j])
            .collect()
    }
}

/// (∫σ^{-s} ΠP, [∫σ^{-1-s} ½ Q_d Π_{e≠d} P_e], ∫σ^{-1-s}(1 − ΠP)) over (0, Δt] without the prefactor.
fn taylor_box(axes: &[f64], dt: f64, s: f64) -> (f64, Vec<f64>, f64) {
    let rule = gauss_legendre(12);
    let lo = 1e-14 * dt;
    let breaks = quad::geometric_breaks(lo, dt, 2.0);
    let (mut at, mut mass) = (0.0, 0.0);
    let mut ad = vec![0.0; axes.len()];
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            let sig = mid + half * x;
            let wq = wt * half;
            let r = 2.0 * sig.sqrt();
            let ec: Vec<f64> = axes.iter().map(|&h| erfc(h / r)).collect();
            let pp: Vec<f64> = ec.iter().map(|e| 1.0 - e).collect();
            let prod: f64 = pp.iter().product();
            at += wq * sig.powf(-s) * prod;
            // 1 − Π(1 − e_d) without cancellation
            let mut one_minus = 0.0;
            let mut keep = 1.0;
            for e in &ec {
                one_minus += keep * e;
                keep *= 1.0 - e;
            }
            mass += wq * sig.powf(-1.0 - s) * one_minus;
            for (d, &h) in axes.iter().enumerate() {
                let g = (-(h * h) / (r * r)).exp() / (PI.sqrt() * r);
                let q = 2.0 * sig * pp[d] - 4.0 * sig * h * g;
                let others: f64 = pp.iter().enumerate().filter(|(e, _)| *e != d).map(|(_, v)| v).product();
                ad[d] += wq * sig.powf(-1.0 - s) * 0.5 * q * others;
            }
        }
    }
    // below `lo` every factor is 1 up to e^{-h²/4lo}
    let head = lo.powf(1.0 - s) / (1.0 - s);
    at += head;
    for v in ad.iter_mut() {
        *v += head;
    }
    (at, ad, mass)
}

/// Gaussian average of one axis profile over the exterior y ∉ [lo, hi].
fn outside(a: &AxisProfile, x: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    a.moments(x, sigma, f64::NEG_INFINITY, lo).0 + a.moments(x, sigma, hi, f64::INFINITY).0
}

/// Mode split into a row factor along the periodic axis and its x_n profile.
struct ModeParts<'a> {
    coef: f64,
    lambda: f64,
    decay: f64,
    rowf: Vec<f64>,
    normal: &'a AxisProfile,
}

impl ModeParts<'_> {
    /// Gaussian decay rate of the x_n factor (ξ² for a cosine).
    fn normal_decay(&self) -> f64 {
        match self.normal {
            AxisProfile::Cosine { xi, .. } => xi * xi,
            _ => 0.0,
        }
    }

    /// e^{−rate σ} times the whole-line average of the x_n factor, with the exponents combined.
    fn full(&self, x: f64, sigma: f64, rate: f64) -> f64 {
        match self.normal {
            AxisProfile::Cosine { xi, phase } => (-(rate + xi * xi) * sigma).exp() * (xi * x + phase).cos(),
            a => (-rate * sigma).exp() * a.full(x, sigma),
        }
    }
}

fn mode_parts<'a>(m: &'a Mode, lat: &Lattice) -> Result<ModeParts<'a>> {
    let normal = m.axes.last().unwrap();
    let (rowf, decay) = if let Some((period, rows)) = lat.periodic {
        match &m.axes[0] {
            AxisProfile::Const => (vec![1.0; rows], 0.0),
            AxisProfile::Cosine { xi, phase } => {
                let k = xi * period / (2.0 * PI);
                if (k - k.round()).abs() > 1e-9 {
                    return Err(Error::Validation(format!(
                        "periodic-axis frequency {xi} does not fit the period {period}"
                    )));
                }
                ((0..rows).map(|i| (xi * lat.x_p(i) + phase).cos()).collect(), xi * xi)
            }
            AxisProfile::Profile { .. } => {
                return Err(Error::Validation("data along the periodic axis must be constant or cosine".into()));
            }
        }
    } else {
        (vec![1.0], 0.0)
    };
    Ok(ModeParts { coef: m.coef, lambda: m.lambda, decay, rowf, normal })
}

#[derive(Debug, Clone)]
struct DataTable {
    coef: f64,
    lambda: f64,
    rowf: Vec<f64>,
    /// [j − 1][k] for interior columns j.
    vals: Vec<Vec<f64>>,
}

/// Integrals of the data over the exterior (y ∉ [lo, hi], τ > t0) and the past (τ < t0).
#[derive(Debug, Clone)]
pub struct DataTables {
    tables: Vec<DataTable>,
    /// Data mass M[j − 1][k] for interior columns.
    mass: Vec<Vec<f64>>,
    /// Largest model uncertainty of the far history integrals.
    pub tail_uncertainty: f64,
}

impl DataTables {
    pub fn new(lat: &Lattice, p: FracParams, exterior: &ModalField, history: &ModalField) -> Result<Self> {
        let unit = Mode { coef: 1.0, lambda: 0.0, axes: vec![AxisProfile::Const; lat.n()] };
        let (mass_ext, _) = one_table(lat, p, &mode_parts(&unit, lat)?, true)?;
        let (mass_hist, _) = one_table(lat, p, &mode_parts(&unit, lat)?, false)?;
        let mass: Vec<Vec<f64>> = mass_ext
            .iter()
            .zip(&mass_hist)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        let mut tables = Vec::new();
        let mut tail_uncertainty: f64 = 0.0;
        for (field, is_ext) in [(exterior, true), (history, false)] {
            if field.n() != lat.n() {
                return Err(Error::Validation("data dimension does not match the lattice".into()));
            }
            for m in field.modes() {
                if m.coef == 0.0 {
                    continue;
                }
                let parts = mode_parts(m, lat)?;
                if !is_ext && parts.lambda + parts.decay + parts.normal_decay() < 0.0 {
                    return Err(Error::Validation(format!(
                        "history mode with λ = {} grows too fast into the past",
                        m.lambda
                    )));
                }
                let (vals, unc) = one_table(lat, p, &parts, is_ext)?;
                tail_uncertainty = tail_uncertainty.max(m.coef.abs() * unc);
                tables.push(DataTable { coef: parts.coef, lambda: parts.lambda, rowf: parts.rowf, vals });
            }
        }
        Ok(Self { tables, mass, tail_uncertainty })
    }

    /// Data mass at interior column j on level k.
    pub fn mass(&self, j: usize, k: usize) -> f64 {
        self.mass[j - 1][k]
    }

    /// Data integral at node (i, j) on level k taken at time t_k.
    pub fn value(&self, i: usize, j: usize, k: usize, tk: f64) -> f64 {
        self.tables
            .iter()
            .map(|tb| tb.coef * (tb.lambda * tk).exp() * tb.rowf[i] * tb.vals[j - 1][k])
            .sum()
    }
}

/// Exterior modes: Σ_{m<k} of the lag-segment integrals. History modes: all lags from kΔt on.
fn one_table(lat: &Lattice, p: FracParams, mp: &ModeParts<'_>, exterior: bool) -> Result<(Vec<Vec<f64>>, f64)> {
    let s = p.s();
    let pref = special::semigroup_prefactor(s);
    let (dt, h, steps) = (lat.dt(), lat.h(), lat.steps);
    let hmin = if lat.rows() > 1 { h.min(lat.hp()) } else { h };
    let rate = mp.lambda + mp.decay;
    let (lo, hi) = (lat.lo, lat.hi);
    let cols: Vec<usize> = (1..lat.cells).collect();
    let rows: Vec<Result<(Vec<f64>, f64)>> = cols
        .par_iter()
        .map(|&j| {
            let x = lat.x_n(j);
            let weight = |sig: f64| pref * sig.powf(-1.0 - s) * (-rate * sig).exp();
            let mut out = vec![0.0; steps + 1];
            if exterior {
                let mut acc = 0.0;
                for (k, o) in out.iter_mut().enumerate() {
                    *o = acc;
                    if k < steps {
                        let (xs, ws) = segment_nodes(k, dt, hmin);
                        for (&sig, &wq) in xs.iter().zip(&ws) {
                            acc += wq * weight(sig) * outside(mp.normal, x, sig, lo, hi);
                        }
                    }
                }
                return Ok((out, 0.0));
            }
            let mut full = vec![0.0; steps + 1];
            for (m, f) in full.iter_mut().enumerate().skip(1) {
                let (xs, ws) = segment_nodes(m, dt, hmin);
                for (&sig, &wq) in xs.iter().zip(&ws) {
                    *f += wq * pref * sig.powf(-1.0 - s) * mp.full(x, sig, rate);
                }
            }
            // lags beyond the lattice
            let a = (steps + 1) as f64 * dt;
            let end = a * FAR_LAG_FACTOR;
            let plan = SingularPlan {
                beta: s,
                cut: a,
                taylor_exps: None,
                slab_weight: Vec::new(),
                breaks: quad::geometric_breaks(a, end, 2.0),
                tail_exps: vec![0.0, -0.5, -1.0, -1.5],
                fit_from: end / 16.0,
                order: 10,
            };
            let d = |sig: f64, _| Ok(mp.full(x, sig, rate));
            let f1 = plan.run(1, d)?;
            let f0 = plan.run(0, d)?;
            let far = pref * f1.value;
            let unc = pref * ((f1.value - f0.value).abs() + f1.model_uncertainty);
            let mut suffix = far;
            for k in (1..=steps).rev() {
                suffix += full[k];
                out[k] = suffix;
            }
            out[0] = suffix;
            Ok((out, unc))
        })
        .collect();
    let mut vals = Vec::with_capacity(rows.len());
    let mut unc: f64 = 0.0;
    for r in rows {
        let (v, u) = r?;
        vals.push(v);
        unc = unc.max(u);
    }
    Ok((vals, unc))
}

/// Circular convolution on rows × p arrays through a real FFT along x_n and a complex FFT across rows.
pub(crate) struct Convolver {
    rows: usize,
    p: usize,
    half: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Convolver {
    fn new(rows: usize, cells: usize) -> Self {
        let p = smooth_size(2 * cells + 1);
        let mut rp = RealFftPlanner::<f64>::new();
        let mut cp = FftPlanner::<f64>::new();
        Self {
            rows,
            p,
            half: p / 2 + 1,
            r2c: rp.plan_fft_forward(p),
            c2r: rp.plan_fft_inverse(p),
            fwd: cp.plan_fft_forward(rows),
            inv: cp.plan_fft_inverse(rows),
        }
    }

    /// Spectrum of a rows × width array (width ≤ p) placed at the start of each padded row.
    fn forward(&self, data: &[f64], width: usize) -> Vec<Complex64> {
        let mut spec = vec![Complex64::new(0.0, 0.0); self.half * self.rows];
        let mut input = vec![0.0; self.p];
        let mut out = vec![Complex64::new(0.0, 0.0); self.half];
        for r in 0..self.rows {
            input.iter_mut().for_each(|v| *v = 0.0);
            input[..width].copy_from_slice(&data[r * width..(r + 1) * width]);
            self.r2c.process(&mut input, &mut out).expect("fft length");
            for (k, v) in out.iter().enumerate() {
                spec[k * self.rows + r] = *v;
            }
        }
        if self.rows > 1 {
            self.fwd.process(&mut spec);
        }
        spec
    }

    /// Spectrum of a weight table indexed by offsets −cells..=cells along x_n.
    fn forward_weights(&self, table: &[f64], cells: usize) -> Vec<Complex64> {
        let width = 2 * cells + 1;
        let mut buf = vec![0.0; self.rows * self.p];
        for r in 0..self.rows {
            for (idx, &v) in table[r * width..(r + 1) * width].iter().enumerate() {
                let a = idx as i64 - cells as i64;
                buf[r * self.p + a.rem_euclid(self.p as i64) as usize] = v;
            }
        }
        self.forward(&buf, self.p)
    }

    /// Inverse transform, keeping the first `width` entries of each row.
    fn inverse(&self, mut spec: Vec<Complex64>, width: usize) -> Vec<f64> {
        if self.rows > 1 {
            self.inv.process(&mut spec);
        }
        let scale = 1.0 / (self.p * self.rows) as f64;
        let mut out = vec![0.0; self.rows * width];
        let mut col = vec![Complex64::new(0.0, 0.0); self.half];
        let mut res = vec![0.0; self.p];
        for r in 0..self.rows {
            for (k, c) in col.iter_mut().enumerate() {
                *c = spec[k * self.rows + r];
            }
            col[0].im = 0.0;
            if self.p % 2 == 0 {
                col[self.half - 1].im = 0.0;
            }
            self.c2r.process(&mut col, &mut res).expect("fft length");
            for (o, v) in out[r * width..(r + 1) * width].iter_mut().zip(&res) {
                *o = v * scale;
            }
        }
        out
    }

    /// Transform along the periodic axis of one column; constant columns are done exactly.
    fn column(&self, v: &[f64]) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        if self.rows > 1 {
            if v.iter().all(|&x| x == v[0]) {
                c.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                c[0] = Complex64::new(v[0] * self.rows as f64, 0.0);
            } else {
                self.fwd.process(&mut c);
            }
        }
        c
    }
}

/// Smallest 2^a·3^b·5^c at or above n.
fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for f in [2, 3, 5] {
            while r % f == 0 {
                r /= f;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

/// Stored levels with their spectra, oldest first.
#[derive(Default)]
pub struct HistoryBuffer {
    pub levels: Vec<Vec<f64>>,
    spectra: Vec<Vec<Complex64>>,
    /// Boundary columns transformed along the periodic axis: (left, right).
    edges: Vec<(Vec<Complex64>, Vec<Complex64>)>,
}

impl HistoryBuffer {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// The assembled lattice operator: weights, their spectra, lattice and data masses, data integrals.
pub struct DiscreteOperator {
    pub lattice: Lattice,
    pub params: FracParams,
    pub weights: LatticeWeights,
    pub data: DataTables,
    conv: Convolver,
    wspec: Vec<Vec<Complex64>>,
    fspec: Vec<Vec<Complex64>>,
    /// Ramp weights transformed along the periodic axis: [b][k' · (cells + 1) + d].
    rspec: Vec<Vec<f64>>,
    rfspec: Vec<Vec<f64>>,
    /// Σ_{b<k} lattice weight seen from column j, ramps removed: [k][j].
    lattice_mass: Vec<Vec<f64>>,
    /// Level-0 part of the lattice weight at lag k: [k][j].
    first_mass: Vec<Vec<f64>>,
}

impl fmt::Debug for DiscreteOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteOperator").field("lattice", &self.lattice).finish()
    }
}

impl DiscreteOperator {
    pub fn new(lat: &Lattice, p: FracParams, exterior: &ModalField, history: &ModalField) -> Result<Self> {
        let weights = LatticeWeights::new(lat, p)?;
        let data = DataTables::new(lat, p, exterior, history)?;
        let conv = Convolver::new(lat.rows(), lat.cells);
        let lags = weights.lags();
        let wspec: Vec<Vec<Complex64>> =
            (0..lags).into_par_iter().map(|b| conv.forward_weights(&weights.w[b], lat.cells)).collect();
        let fspec: Vec<Vec<Complex64>> =
            (0..lags).into_par_iter().map(|b| conv.forward_weights(&weights.first[b], lat.cells)).collect();
        let rows = lat.rows();
        let rw = lat.cells + 1;
        // ramp weights are even in a', so their transform is a real cosine sum
        let rtrans = |table: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; rows * rw];
            for kp in 0..rows {
                for ap in 0..rows {
                    let c = (2.0 * PI * ((kp * ap) % rows) as f64 / rows as f64).cos();
                    for d in 0..rw {
                        out[kp * rw + d] += c * table[ap * rw + d];
                    }
                }
            }
            out
        };
        let rspec: Vec<Vec<f64>> = (0..lags).into_par_iter().map(|b| rtrans(&weights.ramp[b])).collect();
        let rfspec: Vec<Vec<f64>> = (0..lags).into_par_iter().map(|b| rtrans(&weights.ramp_first[b])).collect();
        let mut lattice_mass = Vec::with_capacity(lags);
        let mut first_mass = Vec::with_capacity(lags);
        let mut acc = vec![0.0; lat.cols()];
        for b in 0..lags {
            lattice_mass.push(acc.clone());
            first_mass.push(weights.row_sums(&weights.first[b], &weights.ramp_first[b]));
            for (a, v) in acc.iter_mut().zip(weights.row_sums(&weights.w[b], &weights.ramp[b])) {
                *a += v;
            }
        }
        Ok(Self {
            lattice: lat.clone(),
            params: p,
            weights,
            data,
            conv,
            wspec,
            fspec,
            rspec,
            rfspec,
            lattice_mass,
            first_mass,
        })
    }

    /// Diagonal coefficient c0 at interior column j on level k ≥ 1.
    pub fn c0(&self, j: usize, k: usize) -> f64 {
        self.lattice_mass[k][j] + self.first_mass[k][j] + self.data.mass(j, k)
    }

    /// Kernel mass seen from column j on level k ≥ 1 without the Taylor box terms.
    /// Equals the kernel mass outside the box for every node and level.
    pub fn covered_mass(&self, j: usize, k: usize) -> f64 {
        let lat = &self.lattice;
        let w = &self.weights;
        let mut taylor = w.taylor_time / lat.dt() + 2.0 * w.taylor_space.last().unwrap() / lat.h().powi(2);
        if lat.rows() > 1 {
            taylor += 2.0 * w.taylor_space[0] / lat.hp().powi(2);
        }
        self.c0(j, k) + w.self_weight - taylor
    }

    /// Store a level and its transforms.
    pub fn push_level(&self, hb: &mut HistoryBuffer, level: Vec<f64>) {
        hb.spectra.push(self.conv.forward(&level, self.lattice.cols()));
        hb.edges.push(self.edges(&level));
        hb.levels.push(level);
    }

    fn edges(&self, level: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let lat = &self.lattice;
        let cols = lat.cols();
        let left: Vec<f64> = (0..lat.rows()).map(|i| level[i * cols]).collect();
        let right: Vec<f64> = (0..lat.rows()).map(|i| level[i * cols + lat.cells]).collect();
        (self.conv.column(&left), self.conv.column(&right))
    }

    /// Lattice sum Σ_{m<k} W_{k−m} * U^m + W_0 * `newest`, with boundary hats cut at the boundary
    /// and level-0 hats cut at t0. Values at interior nodes; boundary columns are meaningless.
    pub fn lattice_sum(&self, hb: &HistoryBuffer, k: usize, newest: &[f64]) -> Vec<f64> {
        let lat = &self.lattice;
        let (rows, cols, cells) = (lat.rows(), lat.cols(), lat.cells);
        let rw = cells + 1;
        let newest_spec = self.conv.forward(newest, cols);
        let mut acc = vec![Complex64::new(0.0, 0.0); newest_spec.len()];
        for (m, sp) in hb.spectra.iter().enumerate().take(k) {
            let w = if m == 0 { &self.fspec[k] } else { &self.wspec[k - m] };
            for ((a, x), y) in acc.iter_mut().zip(sp).zip(w) {
                *a += x * y;
            }
        }
        for ((a, x), y) in acc.iter_mut().zip(&newest_spec).zip(&self.wspec[0]) {
            *a += x * y;
        }
        let mut out = self.conv.inverse(acc, cols);

        // outer halves of the boundary hats
        let newest_edges = self.edges(newest);
        let mut corr = vec![Complex64::new(0.0, 0.0); rows * rw];
        let levels = hb.edges.iter().take(k).enumerate().map(|(m, e)| (m, e)).chain(std::iter::once((k, &newest_edges)));
        for (m, (left, right)) in levels {
            let r = if m == 0 && k > 0 { &self.rfspec[k] } else { &self.rspec[k - m] };
            for kp in 0..rows {
                let (l, rr) = (left[kp], right[kp]);
                if l == Complex64::new(0.0, 0.0) && rr == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let rrow = &r[kp * rw..(kp + 1) * rw];
                let crow = &mut corr[kp * rw..(kp + 1) * rw];
                for j in 1..cells {
                    crow[j] += l * rrow[j] + rr * rrow[cells - j];
                }
            }
        }
        if rows > 1 {
            let mut colv = vec![Complex64::new(0.0, 0.0); rows];
            for j in 1..cells {
                for kp in 0..rows {
                    colv[kp] = corr[kp * rw + j];
                }
                self.conv.inv.process(&mut colv);
                for i in 0..rows {
                    out[i * cols + j] -= colv[i].re / rows as f64;
                }
            }
        } else {
            for j in 1..cells {
                out[j] -= corr[j].re;
            }
        }
        out
    }

    /// W_0 * v at interior nodes for a vector vanishing on the boundary columns.
    pub fn lag0(&self, v: &[f64]) -> Vec<f64> {
        let sp = self.conv.forward(v, self.lattice.cols());
        let acc: Vec<Complex64> = sp.iter().zip(&self.wspec[0]).map(|(x, y)| x * y).collect();
        self.conv.inverse(acc, self.lattice.cols())
    }

    /// Total lag-0 lattice weight, an upper bound for every row sum of the newest-level coupling.
    pub fn lag0_total(&self) -> f64 {
        self.weights.w[0].iter().sum()
    }

    /// Data integrals on level k for every interior node (boundary columns are 0).
    pub fn data_level(&self, k: usize) -> Vec<f64> {
        let lat = &self.lattice;
        let tk = lat.t(k);
        let mut out = vec![0.0; lat.len()];
        for i in 0..lat.rows() {
            for j in 1..lat.cells {
                out[i * lat.cols() + j] = self.data.value(i, j, k, tk);
            }
        }
        out
    }

    /// Operator values at interior nodes of levels 1..=steps for sampled levels 0..=steps.
    pub fn apply(&self, levels: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let lat = &self.lattice;
        if levels.len() != lat.steps + 1 || levels.iter().any(|l| l.len() != lat.len()) {
            return Err(Error::Validation("sample array does not match the lattice".into()));
        }
        let mut hb = HistoryBuffer::default();
        for l in levels {
            self.push_level(&mut hb, l.clone());
        }
        (1..=lat.steps)
            .into_par_iter()
            .map(|k| {
                let sum = self.lattice_sum(&hb, k, &levels[k]);
                let data = self.data_level(k);
                let mut out = vec![0.0; lat.len()];
                for i in 0..lat.rows() {
                    for j in 1..lat.cells {
                        let idx = i * lat.cols() + j;
                        out[idx] = self.c0(j, k) * levels[k][idx] - sum[idx] - data[idx];
                    }
                }
                Ok(out)
            })
            .collect()
    }
}

/// Samples of a field on every node of every level.
#[derive(Debug, Clone)]
pub struct GridField {
    pub lattice: Lattice,
    /// levels[k][i · cols + j].
    pub levels: Vec<Vec<f64>>,
}

impl GridField {
    pub fn sample(lattice: &Lattice, f: &ScalarField) -> Self {
        let levels = (0..=lattice.steps)
            .map(|k| {
                let t = lattice.t(k);
                let mut v = vec![0.0; lattice.len()];
                for i in 0..lattice.rows() {
                    for j in 0..lattice.cols() {
                        v[i * lattice.cols() + j] = f.eval(&lattice.point(i, j), t);
                    }
                }
                v
            })
            .collect();
        Self { lattice: lattice.clone(), levels }
    }
}

/// Operator values on the interior nodes of levels 1..=steps; `closure` supplies the data outside.
///
/// Boundary nodes and level 0 must agree with the closure to within `interface_tol`.
pub fn evaluate_grid(samples: &GridField, closure: &ModalField, p: FracParams, interface_tol: f64) -> Result<Vec<Vec<f64>>> {
    let lat = &samples.lattice;
    check_interface(samples, closure, interface_tol)?;
    let op = DiscreteOperator::new(lat, p, closure, closure)?;
    op.apply(&samples.levels)
}

fn check_interface(samples: &GridField, closure: &ModalField, tol: f64) -> Result<()> {
    let lat = &samples.lattice;
    for (k, level) in samples.levels.iter().enumerate() {
        for i in 0..lat.rows() {
            for j in 0..lat.cols() {
                if k > 0 && !lat.is_boundary(j) {
                    continue;
                }
                let want = closure.eval(&lat.point(i, j), lat.t(k));
                let got = level[i * lat.cols() + j];
                if (want - got).abs() > tol * (1.0 + want.abs()) {
                    return Err(Error::Validation(format!(
                        "samples disagree with the exterior/history data at node ({i}, {j}) level {k}: {got} vs {want}"
                    )));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_moments_match_closed_forms() {
        let (m0, m1) = gauss_moments(f64::NEG_INFINITY, f64::INFINITY, 0.3);
        assert!((m0 - 1.0).abs() < 1e-15 && m1.abs() < 1e-15);
        let (h0, h1) = gauss_moments(0.0, f64::INFINITY, 0.25);
        assert!((h0 - 0.5).abs() < 1e-15);
        // ∫_0^∞ z G = 2σ G(0) = 2σ/√(4πσ)
        assert!((h1 - 2.0 * 0.25 / (4.0 * PI * 0.25).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn hats_partition_unity() {
        for &sig in &[1e-4, 0.01, 1.0] {
            let h = 0.05;
            let (g, _, _) = hat_table(h, sig, 4000);
            let total: f64 = g[0] + 2.0 * g[1..].iter().sum::<f64>();
            assert!((total - 1.0).abs() < 1e-13, "σ = {sig}: {total}");
            let (gp, _) = periodic_hat_table(h, 16, sig);
            assert!((gp.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn periodic_paths_agree() {
        // the image sum and the Poisson sum overlap near the switch
        let (h, m) = (0.1, 8);
        let period = h * m as f64;
        let sig = (4.0 * period - h).powi(2) / (WINDOW * WINDOW) * 0.999;
        let (direct, _) = periodic_hat_table(h, m, sig);
        let kmax = 40;
        for (a, d) in direct.iter().enumerate() {
            let mut acc = 1.0;
            for k in 1..=kmax {
                let x = PI * k as f64 / m as f64;
                let om = 2.0 * PI * k as f64 / period;
                acc += 2.0 * (x.sin() / x).powi(2) * (-sig * om * om).exp() * (2.0 * PI * (k * a) as f64 / m as f64).cos();
            }
            assert!((acc / m as f64 - d).abs() < 1e-13);
        }
    }

    #[test]
    fn profile_moments_match_constant_pieces() {
        let step = AxisProfile::step(0.3, -1.0, 2.0);
        let x = 0.1;
        let sig = 0.02;
        let (m0, _) = step.moments(x, sig, f64::NEG_INFINITY, f64::INFINITY);
        let r = 2.0 * sig.sqrt();
        let want = -0.5 * erfc((x - 0.3) / r) + 2.0 * 0.5 * erfc((0.3 - x) / r);
        assert!((m0 - want).abs() < 1e-14);
        let c = AxisProfile::Cosine { xi: 3.0, phase: 0.4 };
        let (n0, _) = c.moments(x, sig, f64::NEG_INFINITY, f64::INFINITY);
        assert!((n0 - c.full(x, sig)).abs() < 1e-12);
    }

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(1025), 1080);
        assert_eq!(smooth_size(7), 8);
    }
}
