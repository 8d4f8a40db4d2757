//! Legendre polynomials with first and second derivatives, and Gauss–Legendre
//! rules on arbitrary intervals.
//!
//! Everything else in the crate that integrates over `t = ξ·η` (Gram matrices,
//! zonal kernel norms, cap multipliers) goes through these two primitives.

use crate::error::{Error, Result};

/// Tolerance for accepting arguments that drifted past ±1 through rounding.
const T_SLACK: f64 = 1e-12;

/// `P_n(t)` together with `P_n'(t)` and `P_n''(t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LegendreTriple {
    pub degree: usize,
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

fn check_argument(t: f64) -> Result<f64> {
    if !t.is_finite() || t.abs() > 1.0 + T_SLACK {
        return Err(Error::OutOfRange(format!("Legendre argument {t} not in [-1, 1]")));
    }
    Ok(t.clamp(-1.0, 1.0))
}

/// Values and derivatives for every degree `0..=n_max` at `t`.
///
/// Derivatives come from the differentiated three-term recurrence, which stays
/// accurate at `|t| = 1` where the closed forms through `1/(1-t²)` break down.
pub fn legendre_all(n_max: usize, t: f64) -> Result<Vec<LegendreTriple>> {
    let t = check_argument(t)?;
    let mut p = vec![0.0; n_max + 1];
    let mut d1 = vec![0.0; n_max + 1];
    let mut d2 = vec![0.0; n_max + 1];
    fill_with_derivatives(t, &mut p, &mut d1, &mut d2);
    Ok((0..=n_max)
        .map(|n| LegendreTriple { degree: n, value: p[n], d1: d1[n], d2: d2[n] })
        .collect())
}

/// Fills `p[n] = P_n(t)` for `n < p.len()`; `t` is assumed to be in range.
pub fn fill_values(t: f64, p: &mut [f64]) {
    if p.is_empty() {
        return;
    }
    p[0] = 1.0;
    if p.len() > 1 {
        p[1] = t;
    }
    for n in 1..p.len().saturating_sub(1) {
        let nf = n as f64;
        p[n + 1] = ((2.0 * nf + 1.0) * t * p[n] - nf * p[n - 1]) / (nf + 1.0);
    }
}

/// Fills values, first and second derivatives; all slices must share a length.
pub fn fill_with_derivatives(t: f64, p: &mut [f64], d1: &mut [f64], d2: &mut [f64]) {
    let len = p.len();
    debug_assert!(d1.len() == len && d2.len() == len);
    if len == 0 {
        return;
    }
    p[0] = 1.0;
    d1[0] = 0.0;
    d2[0] = 0.0;
    if len == 1 {
        return;
    }
    p[1] = t;
    d1[1] = 1.0;
    d2[1] = 0.0;
    for n in 1..len - 1 {
        let nf = n as f64;
        let a = 2.0 * nf + 1.0;
        let np1 = nf + 1.0;
        p[n + 1] = (a * t * p[n] - nf * p[n - 1]) / np1;
        d1[n + 1] = (a * (p[n] + t * d1[n]) - nf * d1[n - 1]) / np1;
        d2[n + 1] = (a * (2.0 * d1[n] + t * d2[n]) - nf * d2[n - 1]) / np1;
    }
}

/// `P_n(t)` for `n = 0..=n_max`.
pub fn legendre_values(n_max: usize, t: f64) -> Result<Vec<f64>> {
    let t = check_argument(t)?;
    let mut p = vec![0.0; n_max + 1];
    fill_values(t, &mut p);
    Ok(p)
}

/// Evaluates `Σ coeffs[n]·P_n(t)` with Clenshaw's recurrence.
pub fn legendre_series(coeffs: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for n in (0..coeffs.len()).rev() {
        let nf = n as f64;
        // alpha_n = (2n+1)/(n+1) t, beta_{n+1} = -(n+1)/(n+2)
        let alpha = (2.0 * nf + 1.0) / (nf + 1.0) * t;
        let beta = -(nf + 1.0) / (nf + 2.0);
        let b0 = coeffs[n] + alpha * b1 + beta * b2;
        b2 = b1;
        b1 = b0;
    }
    b1
}

/// An m-point Gauss–Legendre rule mapped to `[a, b]`.
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// Builds the m-point rule on `[a, b]`; exact for polynomials of degree `2m−1`.
pub fn gauss_rule(m: usize, a: f64, b: f64) -> Result<GaussRule> {
    if m == 0 {
        return Err(Error::OutOfRange("Gauss rule needs at least one point".into()));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::OutOfRange(format!("Gauss interval [{a}, {b}] is empty")));
    }
    let (x, w) = reference_rule(m);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    Ok(GaussRule {
        a,
        b,
        nodes: x.iter().map(|&xi| mid + half * xi).collect(),
        weights: w.iter().map(|&wi| half * wi).collect(),
    })
}

/// Nodes (ascending) and weights on `[-1, 1]`.
fn reference_rule(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mf = m as f64;
    let half = m.div_ceil(2);
    for i in 0..half {
        // Chebyshev-like initial guess for the i-th largest root.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, d) = value_and_derivative(m, z);
            dp = d;
            let step = p / d;
            z -= step;
            if step.abs() <= NEWTON_TOL {
                break;
            }
        }
        let (_, d) = value_and_derivative(m, z);
        if d.is_finite() {
            dp = d;
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[m - 1 - i] = z;
        x[i] = -z;
        w[m - 1 - i] = weight;
        w[i] = weight;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    (x, w)
}

fn value_and_derivative(m: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if m == 0 {
        return (1.0, 0.0);
    }
    for n in 1..m {
        let nf = n as f64;
        let p2 = ((2.0 * nf + 1.0) * z * p1 - nf * p0) / (nf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let mf = m as f64;
    (p1, mf * (z * p1 - p0) / (z * z - 1.0))
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Applies the rule to `f`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }

    /// Smallest point count exact for polynomials of the given degree.
    pub fn points_for_degree(degree: usize) -> usize {
        degree / 2 + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn low_degree_values() {
        let tr = legendre_all(2, 0.5).unwrap();
        assert_relative_eq!(tr[2].value, -0.125, epsilon = 1e-15);
        assert_relative_eq!(tr[2].d1, 1.5, epsilon = 1e-15);
        assert_relative_eq!(tr[2].d2, 3.0, epsilon = 1e-15);
        for &t in &[-1.0, -0.3, 0.0, 0.7, 1.0] {
            let tr = legendre_all(1, t).unwrap();
            assert_eq!(tr[0].value, 1.0);
            assert_eq!(tr[1].value, t);
            assert_eq!(tr[1].d1, 1.0);
            assert_eq!(tr[1].d2, 0.0);
        }
    }

    #[test]
    fn unit_value_at_one() {
        for tr in legendre_all(200, 1.0).unwrap() {
            assert_relative_eq!(tr.value, 1.0, epsilon = 1e-12);
            // P_n'(1) = n(n+1)/2
            let n = tr.degree as f64;
            assert_relative_eq!(tr.d1, n * (n + 1.0) / 2.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(legendre_all(3, 1.1).is_err());
        assert!(legendre_all(3, f64::NAN).is_err());
        assert!(legendre_all(3, 1.0 + 1e-14).is_ok());
    }

    #[test]
    fn differential_equation_residual() {
        for i in 0..=40 {
            let t = -1.0 + 2.0 * i as f64 / 40.0;
            for tr in legendre_all(200, t).unwrap() {
                let n = tr.degree as f64;
                let res = (1.0 - t * t) * tr.d2 - 2.0 * t * tr.d1 + n * (n + 1.0) * tr.value;
                let scale = (1.0 - t * t) * tr.d2.abs()
                    + (2.0 * t * tr.d1).abs()
                    + n * (n + 1.0) * tr.value.abs()
                    + 1.0;
                assert!(res.abs() <= 1e-10 * scale, "n={n} t={t} res={res}");
            }
        }
    }

    #[test]
    fn recurrence_matches_explicit_polynomials() {
        // Rodrigues-expanded P_n for n ≤ 10 via binomial sums.
        fn explicit(n: usize, t: f64) -> f64 {
            // P_n(t) = 2^{-n} Σ_k (-1)^k C(n,k) C(2n-2k, n) t^{n-2k}
            let mut s = 0.0;
            for k in 0..=n / 2 {
                let c = binom(n, k) * binom(2 * n - 2 * k, n);
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                s += sign * c * t.powi((n - 2 * k) as i32);
            }
            s / 2f64.powi(n as i32)
        }
        fn binom(n: usize, k: usize) -> f64 {
            (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        }
        for i in 0..=20 {
            let t = -1.0 + i as f64 / 10.0;
            let p = legendre_values(10, t).unwrap();
            for n in 0..=10 {
                assert!((p[n] - explicit(n, t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn clenshaw_matches_direct_sum() {
        let coeffs: Vec<f64> = (0..30).map(|n| ((n * 7 % 11) as f64 - 5.0) / 3.0).collect();
        for &t in &[-1.0, -0.42, 0.1, 0.99, 1.0] {
            let p = legendre_values(29, t).unwrap();
            let direct: f64 = coeffs.iter().zip(&p).map(|(c, p)| c * p).sum();
            assert_relative_eq!(legendre_series(&coeffs, t), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn gauss_rule_basics() {
        let g = gauss_rule(1, -1.0, 1.0).unwrap();
        assert_eq!(g.nodes, vec![0.0]);
        assert_relative_eq!(g.weights[0], 2.0, epsilon = 1e-15);

        let g = gauss_rule(2, -1.0, 1.0).unwrap();
        assert_relative_eq!(g.integrate(|t| t * t), 2.0 / 3.0, epsilon = 1e-15);

        let g = gauss_rule(64, -1.0, 0.5).unwrap();
        assert_relative_eq!(g.integrate(|t| t), -0.375, epsilon = 1e-14);

        assert!(gauss_rule(0, -1.0, 1.0).is_err());
        assert!(gauss_rule(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn gauss_weights_and_monomials() {
        for m in [1usize, 2, 3, 7, 16, 33, 64, 101, 150] {
            let (a, b) = (-0.7, 2.3);
            let g = gauss_rule(m, a, b).unwrap();
            let sum: f64 = g.weights.iter().sum();
            assert_relative_eq!(sum, b - a, max_relative = 1e-13);
            assert!(g.weights.iter().all(|&w| w > 0.0));
            assert!(g.nodes.windows(2).all(|p| p[0] < p[1]));
            for k in 0..=(2 * m - 1).min(60) {
                let exact = (b.powi(k as i32 + 1) - a.powi(k as i32 + 1)) / (k as f64 + 1.0);
                let got = g.integrate(|t| t.powi(k as i32));
                let scale = exact.abs().max(1.0);
                assert!((got - exact).abs() <= 1e-12 * scale, "m={m} k={k}");
            }
        }
    }

    #[test]
    fn orthogonality() {
        let n_max = 40;
        let g = gauss_rule(n_max + 1, -1.0, 1.0).unwrap();
        let tables: Vec<Vec<f64>> = g.nodes.iter().map(|&t| legendre_values(n_max, t).unwrap()).collect();
        for n in 0..=n_max {
            for m in 0..=n_max {
                let v: f64 = tables.iter().zip(&g.weights).map(|(p, w)| w * p[n] * p[m]).sum();
                let exact = if n == m { 2.0 / (2.0 * n as f64 + 1.0) } else { 0.0 };
                assert!((v - exact).abs() < 1e-12, "n={n} m={m}");
            }
        }
    }
}
