//! Gauss–Legendre rules and small panel helpers shared by the integrators.

use std::sync::OnceLock;

/// Nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

const MAX_ORDER: usize = 64;
static RULES: [OnceLock<Rule>; MAX_ORDER + 1] = [const { OnceLock::new() }; MAX_ORDER + 1];

/// Gauss–Legendre rule of the given order (1..=64), computed once and cached.
pub fn gauss_legendre(order: usize) -> &'static Rule {
    assert!((1..=MAX_ORDER).contains(&order), "unsupported Gauss-Legendre order {order}");
    RULES[order].get_or_init(|| build_rule(order))
}

fn build_rule(n: usize) -> Rule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrate `f` over [a, b] with a single Gauss–Legendre panel.
pub fn panel<F: FnMut(f64) -> f64>(rule: &Rule, a: f64, b: f64, mut f: F) -> f64 {
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(x, w)| w * f(c + h * x))
        .sum::<f64>()
        * h
}

/// Integrate over consecutive panels given by sorted breakpoints.
pub fn panels<F: FnMut(f64) -> f64>(rule: &Rule, breaks: &[f64], mut f: F) -> f64 {
    breaks
        .windows(2)
        .map(|w| panel(rule, w[0], w[1], &mut f))
        .sum()
}

/// Push the nodes and weights of `[a, b]` onto the output vectors.
pub fn push_panel(rule: &Rule, a: f64, b: f64, xs: &mut Vec<f64>, ws: &mut Vec<f64>) {
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        xs.push(c + h * x);
        ws.push(w * h);
    }
}

/// Geometric breakpoints from `a` to `b` (both > 0) with at most `ratio` between neighbours.
pub fn geometric_breaks(a: f64, b: f64, ratio: f64) -> Vec<f64> {
    debug_assert!(a > 0.0 && b > a && ratio > 1.0);
    let count = ((b / a).ln() / ratio.ln()).ceil().max(1.0) as usize;
    let q = (b / a).powf(1.0 / count as f64);
    let mut out = Vec::with_capacity(count + 1);
    let mut x = a;
    out.push(a);
    for _ in 1..count {
        x *= q;
        out.push(x);
    }
    out.push(b);
    out
}

/// Uniform breakpoints on [a, b] with at most `h` per panel.
pub fn uniform_breaks(a: f64, b: f64, h: f64) -> Vec<f64> {
    let count = ((b - a) / h).ceil().max(1.0) as usize;
    (0..=count)
        .map(|i| if i == count { b } else { a + (b - a) * i as f64 / count as f64 })
        .collect()
}

/// Split every panel in two.
pub fn bisect_breaks(breaks: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * breaks.len());
    for w in breaks.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    if let Some(last) = breaks.last() {
        out.push(*last);
    }
    out
}

/// Merge extra breakpoints inside (a, b) into a sorted breakpoint list, dropping near-duplicates.
pub fn merge_breaks(base: &[f64], extra: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let lo = base[0];
    let hi = *base.last().unwrap();
    let mut all: Vec<f64> = base.to_vec();
    all.extend(extra.into_iter().filter(|&x| x > lo && x < hi));
    all.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = (hi - lo).abs().max(1e-300);
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for x in all {
        match out.last() {
            Some(&y) if (x - y).abs() <= 1e-13 * scale.max(x.abs()) => {}
            _ => out.push(x),
        }
    }
    // the upper end must survive deduplication
    if let Some(last) = out.last_mut() {
        *last = hi;
    }
    out
}

/// Least-squares fit `y ≈ Σ c_k x^{e_k}`; returns the coefficients (normal equations, tiny systems only).
pub fn power_fit(xs: &[f64], ys: &[f64], exponents: &[f64]) -> Option<Vec<f64>> {
    let m = exponents.len();
    if xs.len() < m {
        return None;
    }
    // scale columns by their value at the largest abscissa to keep the system balanced
    let xref = xs.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<Vec<f64>> = exponents
        .iter()
        .map(|&e| xs.iter().map(|&x| (x / xref).powf(e)).collect())
        .collect();
    // QR by modified Gram–Schmidt
    let mut q = cols.clone();
    let mut r = vec![vec![0.0; m]; m];
    for j in 0..m {
        for i in 0..j {
            let d: f64 = q[i].iter().zip(&q[j]).map(|(a, b)| a * b).sum();
            r[i][j] = d;
            let qi = q[i].clone();
            for (v, u) in q[j].iter_mut().zip(&qi) {
                *v -= d * u;
            }
        }
        let nrm = q[j].iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm == 0.0 || !nrm.is_finite() {
            return None;
        }
        r[j][j] = nrm;
        for v in q[j].iter_mut() {
            *v /= nrm;
        }
    }
    let qty: Vec<f64> = (0..m)
        .map(|i| q[i].iter().zip(ys).map(|(a, b)| a * b).sum())
        .collect();
    let mut c = vec![0.0; m];
    for i in (0..m).rev() {
        let mut acc = qty[i];
        for j in i + 1..m {
            acc -= r[i][j] * c[j];
        }
        c[i] = acc / r[i][i];
    }
    Some(
        c.iter()
            .zip(exponents)
            .map(|(ci, &e)| ci / xref.powf(e))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        for n in [1usize, 2, 5, 10, 16, 32] {
            let r = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let got = panel(r, 0.0, 1.0, |x| x.powi(deg as i32));
                assert!((got - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn geometric_breaks_respect_ratio() {
        let b = geometric_breaks(1e-3, 10.0, 2.0);
        assert_eq!(b[0], 1e-3);
        assert_eq!(*b.last().unwrap(), 10.0);
        for w in b.windows(2) {
            assert!(w[1] / w[0] <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn power_fit_recovers_coefficients() {
        let xs: Vec<f64> = (1..20).map(|i| 10.0 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 / x + 0.5 / (x * x)).collect();
        let c = power_fit(&xs, &ys, &[0.0, -1.0, -2.0]).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-10);
        assert!((c[1] + 2.0).abs() < 1e-8);
    }
}
