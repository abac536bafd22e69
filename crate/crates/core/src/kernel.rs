//! The space–time heat kernel weight e^{-|z|²/4σ} σ^{-(n/2+1+s)} and its tail bounds.

use crate::error::{Error, Result};
use crate::special::{self, upper_gamma_q_half, FracParams};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Offset (z, σ) = (x − y, t − τ).
#[derive(Debug, Clone, PartialEq)]
pub struct KernelPoint {
    pub z: Vec<f64>,
    pub sigma: f64,
}

impl KernelPoint {
    pub fn new(z: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!("time lag must be positive, got {sigma}")));
        }
        Ok(Self { z, sigma })
    }
}

/// Truncation radii and the certified bound on the discarded relative mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct TailBudget {
    pub R_max: f64,
    pub T_max: f64,
    pub tail_mass: f64,
}

/// log of the kernel weight.
pub fn log_weight(z2: f64, sigma: f64, p: FracParams) -> f64 {
    -z2 / (4.0 * sigma) - p.kernel_exponent() * sigma.ln()
}

pub fn weight(kp: &KernelPoint, p: FracParams) -> Result<f64> {
    if !(kp.sigma > 0.0) {
        return Err(Error::Domain(format!("time lag must be positive, got {}", kp.sigma)));
    }
    if kp.z.len() != p.n() {
        return Err(Error::Domain(format!(
            "offset has length {} but n = {}",
            kp.z.len(),
            p.n()
        )));
    }
    let z2: f64 = kp.z.iter().map(|v| v * v).sum();
    Ok(log_weight(z2, kp.sigma, p).exp())
}

/// Ratio of the kernel to (|z|^{n+2+2s} + τ^{n/2+1+s})^{-1}; depends only on ρ = |z|²/τ.
fn tail_ratio(rho: f64, a: f64) -> f64 {
    (-rho / 4.0).exp() * (rho.powf(a) + 1.0)
}

/// Stationary point of the ratio: a ρ^{a-1} = (ρ^a + 1)/4.
fn critical_rho(a: f64) -> f64 {
    let g = |r: f64| a * r.powf(a - 1.0) - (r.powf(a) + 1.0) / 4.0;
    let (mut lo, mut hi) = (1.0, 8.0 * a + 8.0);
    // g(1) > 0 for a > 1/2, g(hi) < 0
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Envelope constant C with kernel ≤ C / (|z|^{n+2+2s} + τ^{n/2+1+s}).
pub fn tail_bound_constant(p: FracParams) -> f64 {
    let a = p.kernel_exponent();
    let m = 200;
    let (lo, hi) = (1e-6f64.ln(), 1e6f64.ln());
    let mut best = tail_ratio(critical_rho(a), a);
    for i in 0..m {
        let z = (lo + (hi - lo) * i as f64 / (m - 1) as f64).exp();
        for j in 0..m {
            let tau = (lo + (hi - lo) * j as f64 / (m - 1) as f64).exp();
            best = best.max(tail_ratio(z * z / tau, a));
        }
    }
    1.05 * best
}

/// ∫_0^∞ r^q / (a + r^p) dr in closed form (valid for 0 < q + 1 < p).
pub fn power_ratio_integral(a: f64, p: f64, q: f64) -> f64 {
    PI * a.powf((q + 1.0 - p) / p) / (p * ((q + 1.0) * PI / p).sin())
}

/// Truncation radii for the exterior region {σ > r², |z| > r} keeping the discarded relative mass ≤ tol.
pub fn truncation(p: FracParams, tol: f64, r_inner: f64) -> Result<TailBudget> {
    if !(tol > 0.0) || !(r_inner > 0.0) {
        return Err(Error::Domain("truncation needs tol > 0 and r_inner > 0".into()));
    }
    let s = p.s();
    let half_n = p.n() as f64 / 2.0;
    let gauss = (4.0 * PI).powf(half_n);
    let c0 = 1.0 / special::exterior_mass(p, 1.0, 1e-10)?.value;
    let total = r_inner.powf(-2.0 * s) / c0;
    // full-Gaussian mass beyond T: gauss · T^{-s}/s
    let t_max = (gauss / (s * 0.5 * tol * total)).powf(1.0 / s).max(r_inner * r_inner);
    let time_part = gauss * t_max.powf(-s) / s / total;
    // spatial part: gauss · Q(n/2, R²/4T) · r^{-2s}/s
    let space_of = |rr: f64| gauss * upper_gamma_q_half(half_n, rr * rr / (4.0 * t_max)) * r_inner.powf(-2.0 * s) / s / total;
    let mut hi = 2.0 * t_max.sqrt().max(r_inner);
    while space_of(hi) > 0.5 * tol {
        hi *= 2.0;
    }
    let mut lo = r_inner;
    if space_of(lo) <= 0.5 * tol {
        hi = lo;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-14 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if space_of(mid) > 0.5 * tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r_max = hi;
    Ok(TailBudget {
        R_max: r_max,
        T_max: t_max,
        tail_mass: time_part + space_of(r_max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_rejects_nonpositive_lag() {
        let p = FracParams::new(1, 0.5).unwrap();
        assert!(KernelPoint::new(vec![0.0], 0.0).is_err());
        let kp = KernelPoint { z: vec![0.0], sigma: -1.0 };
        assert!(weight(&kp, p).is_err());
    }

    #[test]
    fn weight_tiny_lag_underflows_to_zero() {
        let p = FracParams::new(2, 0.5).unwrap();
        let kp = KernelPoint::new(vec![1.0, 0.0], 1e-300).unwrap();
        assert_eq!(weight(&kp, p).unwrap(), 0.0);
    }

    #[test]
    fn critical_ray_is_stationary() {
        let a = 2.0;
        let r = critical_rho(a);
        let d = (tail_ratio(r * 1.0001, a) - tail_ratio(r * 0.9999, a)) / (0.0002 * r);
        assert!(d.abs() < 1e-6);
    }
}
