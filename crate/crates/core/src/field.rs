//! Evaluable space–time fields with the metadata the integrators rely on.

use crate::error::{Error, Result};
use crate::special::FracParams;
use std::fmt;
use std::sync::Arc;

pub type FieldFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Uniform bound or growth envelope |u| ≤ A (1 + |x|^p + |t|^q).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Sup(f64),
    Growth { a: f64, p: f64, q: f64 },
}

/// Parabolic Hölder metadata: exponents in space and time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothness {
    Smooth,
    Holder { space: f64, time: f64 },
}

/// Which variables the field actually depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dependence {
    SpaceTime,
    SpaceOnly,
    TimeOnly,
}

#[derive(Clone)]
pub struct ScalarField {
    n: usize,
    eval: FieldFn,
    pub bound: Bound,
    pub smoothness: Smoothness,
    pub dependence: Dependence,
    /// Spatial feature size; quadrature panels never exceed it where the field varies.
    pub length_scale: f64,
    /// Per-axis coordinates where the field loses smoothness.
    pub space_breaks: Vec<Vec<f64>>,
    /// Times where the field loses smoothness.
    pub time_breaks: Vec<f64>,
    /// Box outside of which the field does not depend on x (for each fixed t).
    pub flat_box: Option<Vec<(f64, f64)>>,
    pub name: String,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("bound", &self.bound)
            .field("smoothness", &self.smoothness)
            .field("dependence", &self.dependence)
            .field("length_scale", &self.length_scale)
            .finish()
    }
}

impl ScalarField {
    pub fn new<F>(n: usize, f: F) -> Self
    where
        F: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            n,
            eval: Arc::new(f),
            bound: Bound::Sup(f64::INFINITY),
            smoothness: Smoothness::Smooth,
            dependence: Dependence::SpaceTime,
            length_scale: 1.0,
            space_breaks: vec![Vec::new(); n],
            time_breaks: Vec::new(),
            flat_box: None,
            name: "field".into(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        (self.eval)(x, t)
    }

    pub fn closure(&self) -> FieldFn {
        self.eval.clone()
    }

    pub fn bounded(mut self, m: f64) -> Self {
        self.bound = Bound::Sup(m);
        self
    }

    pub fn growth(mut self, a: f64, p: f64, q: f64) -> Self {
        self.bound = Bound::Growth { a, p, q };
        self
    }

    pub fn holder(mut self, space: f64, time: f64) -> Self {
        self.smoothness = Smoothness::Holder { space, time };
        self
    }

    pub fn space_only(mut self) -> Self {
        self.dependence = Dependence::SpaceOnly;
        self
    }

    pub fn time_only(mut self) -> Self {
        self.dependence = Dependence::TimeOnly;
        self
    }

    pub fn length_scale(mut self, l: f64) -> Self {
        self.length_scale = l;
        self
    }

    pub fn with_space_breaks(mut self, axis: usize, b: Vec<f64>) -> Self {
        self.space_breaks[axis] = b;
        self
    }

    pub fn with_time_breaks(mut self, b: Vec<f64>) -> Self {
        self.time_breaks = b;
        self
    }

    pub fn flat_outside(mut self, bx: Vec<(f64, f64)>) -> Self {
        self.flat_box = Some(bx);
        self
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    /// a·u + b·v with merged metadata.
    pub fn combine(a: f64, u: &ScalarField, b: f64, v: &ScalarField) -> ScalarField {
        let (fu, fv) = (u.eval.clone(), v.eval.clone());
        let mut out = ScalarField::new(u.n, move |x, t| a * fu(x, t) + b * fv(x, t));
        out.bound = match (u.bound, v.bound) {
            (Bound::Sup(m1), Bound::Sup(m2)) => Bound::Sup(a.abs() * m1 + b.abs() * m2),
            (b1, b2) => {
                let (a1, p1, q1) = envelope_parts(b1);
                let (a2, p2, q2) = envelope_parts(b2);
                Bound::Growth {
                    a: a.abs() * a1 + b.abs() * a2,
                    p: p1.max(p2),
                    q: q1.max(q2),
                }
            }
        };
        out.smoothness = match (u.smoothness, v.smoothness) {
            (Smoothness::Smooth, Smoothness::Smooth) => Smoothness::Smooth,
            (Smoothness::Holder { space, time }, Smoothness::Smooth)
            | (Smoothness::Smooth, Smoothness::Holder { space, time }) => Smoothness::Holder { space, time },
            (
                Smoothness::Holder { space: s1, time: t1 },
                Smoothness::Holder { space: s2, time: t2 },
            ) => Smoothness::Holder { space: s1.min(s2), time: t1.min(t2) },
        };
        out.dependence = if u.dependence == v.dependence { u.dependence } else { Dependence::SpaceTime };
        out.length_scale = u.length_scale.min(v.length_scale);
        out.space_breaks = (0..u.n)
            .map(|d| {
                let mut b = u.space_breaks[d].clone();
                b.extend(&v.space_breaks[d]);
                b
            })
            .collect();
        out.time_breaks = u.time_breaks.iter().chain(&v.time_breaks).cloned().collect();
        out.flat_box = match (&u.flat_box, &v.flat_box) {
            (Some(b1), Some(b2)) => Some(
                b1.iter()
                    .zip(b2)
                    .map(|(x, y)| (x.0.min(y.0), x.1.max(y.1)))
                    .collect(),
            ),
            _ => None,
        };
        out.name = format!("{a}*{} + {b}*{}", u.name, v.name);
        out
    }

    /// u(x − h, t − τ0): translate the field and its metadata.
    pub fn translated(&self, h: &[f64], tau0: f64) -> ScalarField {
        let f = self.eval.clone();
        let h2 = h.to_vec();
        let mut out = self.clone();
        out.eval = Arc::new(move |x: &[f64], t: f64| {
            let y: Vec<f64> = x.iter().zip(&h2).map(|(a, b)| a - b).collect();
            f(&y, t - tau0)
        });
        out.space_breaks = self
            .space_breaks
            .iter()
            .zip(h)
            .map(|(b, hd)| b.iter().map(|v| v + hd).collect())
            .collect();
        out.time_breaks = self.time_breaks.iter().map(|v| v + tau0).collect();
        out.flat_box = self
            .flat_box
            .as_ref()
            .map(|bx| bx.iter().zip(h).map(|(&(lo, hi), hd)| (lo + hd, hi + hd)).collect());
        out.name = format!("{} translated", self.name);
        out
    }

    /// u(x/r, t/r²): parabolic dilation of the field and its metadata.
    pub fn dilated(&self, r: f64) -> ScalarField {
        let f = self.eval.clone();
        let mut out = self.clone();
        out.eval = Arc::new(move |x: &[f64], t: f64| {
            let y: Vec<f64> = x.iter().map(|v| v / r).collect();
            f(&y, t / (r * r))
        });
        out.length_scale = self.length_scale * r;
        out.space_breaks = self
            .space_breaks
            .iter()
            .map(|b| b.iter().map(|v| v * r).collect())
            .collect();
        out.time_breaks = self.time_breaks.iter().map(|v| v * r * r).collect();
        out.flat_box = self
            .flat_box
            .as_ref()
            .map(|bx| bx.iter().map(|&(lo, hi)| (lo * r, hi * r)).collect());
        if let Bound::Growth { a, p, q } = self.bound {
            out.bound = Bound::Growth {
                a: a * (1.0 + r.powf(-p) + r.powf(-2.0 * q)),
                p,
                q,
            };
        }
        out.name = format!("{} dilated by {r}", self.name);
        out
    }

    /// Check that the declared envelope puts the field in the admissible class for order s.
    pub fn check_admissible(&self, p: FracParams) -> Result<()> {
        if self.n != p.n() {
            return Err(Error::Validation(format!(
                "field '{}' has dimension {} but n = {}",
                self.name,
                self.n,
                p.n()
            )));
        }
        match self.bound {
            Bound::Sup(m) if m.is_finite() && m >= 0.0 => Ok(()),
            Bound::Sup(_) => Err(Error::Validation(format!(
                "field '{}' declares neither a finite bound nor a growth envelope",
                self.name
            ))),
            Bound::Growth { a, p: gp, q } => {
                if !(a.is_finite() && a >= 0.0) {
                    return Err(Error::Validation(format!("field '{}': bad envelope constant", self.name)));
                }
                // ∫ (1+|y|^p+|τ|^q) e^{-|y|²/4σ} σ^{-(n/2+1+s)} converges at infinity iff p < 2s and q < s
                if gp >= 2.0 * p.s() || q >= p.s() {
                    return Err(Error::Validation(format!(
                        "field '{}': growth exponents (p = {gp}, q = {q}) need p < 2s and q < s for s = {}",
                        self.name,
                        p.s()
                    )));
                }
                Ok(())
            }
        }
    }

    /// Spot-check the declared bound at deterministic sample points.
    pub fn spot_check(&self, center: &[f64], t0: f64, samples: usize) -> Result<()> {
        let mut state = 0x9e37_79b9_7f4a_7c15u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..samples {
            let x: Vec<f64> = center.iter().map(|c| c + 8.0 * self.length_scale * (2.0 * next() - 1.0)).collect();
            let t = t0 - 8.0 * self.length_scale.powi(2) * next();
            let v = self.eval(&x, t);
            if !v.is_finite() {
                return Err(Error::FieldEval {
                    at: format!("x = {x:?}, t = {t}"),
                    reason: format!("field '{}' returned {v}", self.name),
                });
            }
            let limit = match self.bound {
                Bound::Sup(m) => m,
                Bound::Growth { a, p, q } => {
                    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    a * (1.0 + r.powf(p) + t.abs().powf(q))
                }
            };
            if v.abs() > limit * (1.0 + 1e-12) + 1e-300 {
                return Err(Error::Validation(format!(
                    "field '{}' value {v} at x = {x:?}, t = {t} exceeds its declared bound {limit}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    // ---- common fields ----

    pub fn constant(n: usize, c: f64) -> ScalarField {
        ScalarField::new(n, move |_, _| c)
            .bounded(c.abs())
            .flat_outside(vec![(0.0, 0.0); n])
            .named("constant")
    }

    /// e^{λt} cos(ξ·x); the declared bound e^{max(λ,0)} holds for t ≤ 1.
    pub fn exp_cos(lambda: f64, xi: &[f64]) -> ScalarField {
        let xi2 = xi.to_vec();
        let k = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let f = ScalarField::new(xi.len(), move |x, t| {
            let ph: f64 = x.iter().zip(&xi2).map(|(a, b)| a * b).sum();
            (lambda * t).exp() * ph.cos()
        });
        let f = f.bounded(lambda.max(0.0).exp());
        let f = if lambda == 0.0 { f.space_only() } else { f };
        let f = if k == 0.0 { f.time_only() } else { f.length_scale((1.0 / k).min(1.0)) };
        f.named("exp_cos")
    }

    /// (x_n)_+^s: the one-dimensional half-space profile, time independent.
    pub fn half_space_power(n: usize, s: f64) -> ScalarField {
        ScalarField::new(n, move |x, _| x[n - 1].max(0.0).powf(s))
            .growth(1.0, s, 0.0)
            .space_only()
            .with_space_breaks(n - 1, vec![0.0])
            .named("half_space_power")
    }

    /// A·exp(−|x−c|²/w² − (t−c_t)²/w_t²).
    pub fn gaussian_bump(amp: f64, center: &[f64], width: f64, t_center: f64, t_width: f64) -> ScalarField {
        let c = center.to_vec();
        ScalarField::new(center.len(), move |x, t| {
            let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            amp * (-r2 / (width * width) - (t - t_center).powi(2) / (t_width * t_width)).exp()
        })
        .bounded(amp.abs())
        .length_scale(width.min(t_width.sqrt()).min(1.0))
        .named("gaussian_bump")
    }
}

fn envelope_parts(b: Bound) -> (f64, f64, f64) {
    match b {
        Bound::Sup(m) => (m, 0.0, 0.0),
        Bound::Growth { a, p, q } => (a, p, q),
    }
}

/// Quintic smoothstep 6t⁵ − 15t⁴ + 10t³ clamped to [0, 1] (C² at both ends).
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_membership_rules() {
        let p = FracParams::new(1, 0.5).unwrap();
        let ok = ScalarField::new(1, |x, _| x[0]).growth(1.0, 0.9, 0.0);
        assert!(ok.check_admissible(p).is_ok());
        let bad = ScalarField::new(1, |x, _| x[0]).growth(1.0, 1.0, 0.0);
        assert!(bad.check_admissible(p).is_err());
        let bad_t = ScalarField::new(1, |_, t| t).growth(1.0, 0.0, 0.5);
        assert!(bad_t.check_admissible(p).is_err());
    }

    #[test]
    fn spot_check_catches_lying_bound() {
        let f = ScalarField::new(1, |x, _| 2.0 + x[0].sin()).bounded(1.0);
        assert!(f.spot_check(&[0.0], 0.0, 50).is_err());
        let g = ScalarField::new(1, |x, _| x[0].sin()).bounded(1.0);
        assert!(g.spot_check(&[0.0], 0.0, 50).is_ok());
    }

    #[test]
    fn smoothstep_is_c2_at_ends() {
        let h = 1e-4;
        assert!(smoothstep(h) < 1e-11);
        assert!((1.0 - smoothstep(1.0 - h)) < 1e-11);
        assert_eq!(smoothstep(0.5), 0.5);
    }
}
