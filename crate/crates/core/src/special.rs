//! Gamma, erfc, and the two normalization constants of the operator.

use crate::error::{Error, Result};
use crate::operator::QuadratureConfig;
use crate::quad::{self, gauss_legendre};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Spatial dimension and fractional order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    n: usize,
    s: f64,
}

impl FracParams {
    pub fn new(n: usize, s: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("spatial dimension n must be >= 1".into()));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Domain(format!("fractional order s = {s} must lie in (0, 1)")));
        }
        Ok(Self { n, s })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Kernel exponent n/2 + 1 + s.
    pub fn kernel_exponent(&self) -> f64 {
        self.n as f64 / 2.0 + 1.0 + self.s
    }
}

const LANCZOS_G: f64 = 607.0 / 128.0;
const LANCZOS: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_746,
    -0.491_913_816_097_620_2,
    3.399_464_998_481_189e-5,
    4.652_362_892_704_858e-5,
    -9.837_447_530_487_956e-5,
    1.580_887_032_249_125e-4,
    -2.102_644_417_241_048_8e-4,
    2.174_396_181_152_126_5e-4,
    -1.643_181_065_367_639e-4,
    8.441_822_398_385_275e-5,
    -2.619_083_840_158_141e-5,
    3.689_918_265_953_162_5e-6,
];

/// sin(πx) with exact zeros at the integers.
pub fn sin_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    let (y, sign) = if r > 1.0 { (r - 1.0, -1.0) } else { (r, 1.0) };
    let y = if y > 0.5 { 1.0 - y } else { y };
    sign * (PI * y).sin()
}

/// Γ(x) for real x that is not a non-positive integer.
pub fn gamma(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("gamma of NaN".into()));
    }
    if x <= 0.0 && x == x.floor() {
        return Err(Error::Domain(format!("gamma has a pole at {x}")));
    }
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        PI / (sin_pi(x) * gamma_unchecked(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS[0];
        for (i, c) in LANCZOS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G + 0.5;
        // split the power so t^(x+1/2) cannot overflow before the exponential damps it
        let half = t.powf(0.5 * (x + 0.5));
        (2.0 * PI).sqrt() * half * (half * (-t).exp()) * acc
    }
}

/// Complementary error function (libm backing).
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Error function (libm backing).
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

/// Surface area of the unit sphere in R^n.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_unchecked(n as f64 / 2.0)
}

/// Regularized upper incomplete gamma Q(a, x) for a ∈ {1/2, 1, 3/2, 2, ...}.
pub fn upper_gamma_q_half(a: f64, x: f64) -> f64 {
    debug_assert!((2.0 * a).fract() == 0.0 && a > 0.0);
    if x <= 0.0 {
        return 1.0;
    }
    let (mut cur, mut q) = if (a.fract() - 0.5).abs() < 1e-12 {
        (0.5, erfc(x.sqrt()))
    } else {
        (1.0, (-x).exp())
    };
    while cur < a - 1e-12 {
        // Q(b+1, x) = Q(b, x) + x^b e^{-x} / Γ(b+1)
        q += (cur * x.ln() - x - ln_gamma(cur + 1.0)).exp();
        cur += 1.0;
    }
    q.min(1.0)
}

/// log Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        return gamma_unchecked(x).ln();
    }
    let y = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (y + i as f64);
    }
    let t = y + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (y + 0.5) * t.ln() - t + acc.ln()
}

/// C_{n,s} = 1 / ((4π)^{n/2} |Γ(−s)|).
pub fn normalization_constant(p: FracParams) -> f64 {
    1.0 / ((4.0 * PI).powf(p.n as f64 / 2.0) * gamma_unchecked(-p.s).abs())
}

/// 1/|Γ(−s)|, the prefactor of the heat-semigroup form of the operator.
pub fn semigroup_prefactor(s: f64) -> f64 {
    1.0 / gamma_unchecked(-s).abs()
}

/// Integral with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Lag (in units of r²) where the 2D integration hands over to the tail series.
const TAIL_START: f64 = 64.0;
const TAIL_TERMS: usize = 24;

/// ∫_T^∞ σ^{-1-s} (4π)^{n/2} Q(n/2, r²/4σ) dσ by its convergent series; returns (value, last term).
fn exterior_tail_series(p: FracParams, r: f64, t: f64) -> (f64, f64) {
    let a = p.n as f64 / 2.0;
    let s = p.s;
    let x = r * r / (4.0 * t);
    let mut sum = 0.0;
    let mut last = 0.0;
    let ln_ga = ln_gamma(a);
    for k in 0..TAIL_TERMS {
        let kf = k as f64;
        let ln_term = (a + kf) * x.ln() - ln_gamma(kf + 1.0) - ln_ga - s * t.ln();
        let term = ln_term.exp() / ((a + kf) * (s + a + kf));
        last = term;
        sum += if k % 2 == 0 { term } else { -term };
        if term < 1e-20 * sum.abs() {
            break;
        }
    }
    let scale = (4.0 * PI).powf(a);
    (scale * (t.powf(-s) / s - sum), scale * last)
}

/// ∫_{σ>T} ∫_{|z|>r} e^{-|z|²/4σ} σ^{-(n/2+1+s)} dz dσ for T ≥ r², with the size of the last series term.
pub fn exterior_mass_beyond(p: FracParams, r: f64, t: f64) -> (f64, f64) {
    exterior_tail_series(p, r, t)
}

/// ∫_{σ>r²} ∫_{|z|>r} e^{-|z|²/4σ} σ^{-(n/2+1+s)} dz dσ by radial × lag Gauss–Legendre quadrature.
pub fn exterior_mass(p: FracParams, r: f64, rel_tol: f64) -> Result<Estimate> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let a = p.kernel_exponent();
    let nd = p.n;
    let area = sphere_area(nd);
    let rule = gauss_legendre(20);
    let t_hi = TAIL_START * r * r;

    let main = |ratio: f64, radial_panels: usize| -> f64 {
        let sig_breaks = quad::geometric_breaks(r * r, t_hi, ratio);
        quad::panels(rule, &sig_breaks, |sig| {
            let rho_hi = r + 15.0 * sig.sqrt();
            let rb = quad::uniform_breaks(r, rho_hi, (rho_hi - r) / radial_panels as f64);
            let inner = quad::panels(rule, &rb, |rho| {
                rho.powi(nd as i32 - 1) * (-rho * rho / (4.0 * sig)).exp()
            });
            area * inner * sig.powf(-a)
        })
    };
    let coarse = main(1.6, 8);
    let fine = main(1.6f64.sqrt(), 16);
    let (tail, tail_err) = exterior_tail_series(p, r, t_hi);
    let value = fine + tail;
    let error = (fine - coarse).abs() + tail_err;
    if error > rel_tol * value.abs() {
        return Err(Error::Accuracy {
            context: "exterior kernel mass".into(),
            estimate: error / value.abs(),
            target: rel_tol,
        });
    }
    Ok(Estimate { value, error })
}

/// For n = 1: 1/C_0 = 2√π ∫_1^∞ σ^{-(1+s)} erfc(1/(2√σ)) dσ.
fn exterior_mass_reduced_1d(p: FracParams) -> Estimate {
    let rule = gauss_legendre(20);
    let s = p.s;
    let f = |sig: f64| 2.0 * PI.sqrt() * sig.powf(-1.0 - s) * erfc(0.5 / sig.sqrt());
    let coarse = quad::panels(rule, &quad::geometric_breaks(1.0, TAIL_START, 1.6), f);
    let fine = quad::panels(rule, &quad::geometric_breaks(1.0, TAIL_START, 1.6f64.sqrt()), f);
    let (tail, tail_err) = exterior_tail_series(p, 1.0, TAIL_START);
    Estimate {
        value: fine + tail,
        error: (fine - coarse).abs() + tail_err,
    }
}

/// C_0 = 1 / ∫_{σ>1} ∫_{|y|>1} e^{-|y|²/4σ} σ^{-(n/2+1+s)} dy dσ.
pub fn average_constant(p: FracParams, cfg: &QuadratureConfig) -> Result<f64> {
    let mass = exterior_mass(p, 1.0, cfg.rel_tol)?;
    if p.n == 1 {
        let reduced = exterior_mass_reduced_1d(p);
        let diff = (mass.value - reduced.value).abs() / mass.value;
        if diff > 10.0 * cfg.rel_tol {
            return Err(Error::Accuracy {
                context: "average constant: 2D and erfc-reduced routes disagree".into(),
                estimate: diff,
                target: 10.0 * cfg.rel_tol,
            });
        }
    }
    Ok(1.0 / mass.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_reference_values() {
        assert_eq!(gamma(1.0).unwrap(), 1.0);
        assert!((gamma(0.5).unwrap() - PI.sqrt()).abs() < 1e-15);
        assert!((gamma(-0.5).unwrap() + 2.0 * PI.sqrt()).abs() < 1e-14);
        assert!((gamma(5.0).unwrap() - 24.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_poles_rejected() {
        for x in [0.0, -1.0, -7.0] {
            assert!(matches!(gamma(x), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn params_reject_endpoints() {
        assert!(FracParams::new(1, 0.0).is_err());
        assert!(FracParams::new(1, 1.0).is_err());
        assert!(FracParams::new(0, 0.5).is_err());
        assert!(FracParams::new(2, 0.3).is_ok());
    }

    #[test]
    fn upper_gamma_matches_closed_forms() {
        let x: f64 = 0.37;
        assert!((upper_gamma_q_half(0.5, x) - erfc(x.sqrt())).abs() < 1e-15);
        assert!((upper_gamma_q_half(1.0, x) - (-x).exp()).abs() < 1e-15);
        // Q(2, x) = (1 + x) e^{-x}
        assert!((upper_gamma_q_half(2.0, x) - (1.0 + x) * (-x).exp()).abs() < 1e-15);
    }
}
