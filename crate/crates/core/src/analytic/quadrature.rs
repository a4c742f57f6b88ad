use std::f64::consts::PI;

use super::TestFunction;
use crate::{Error, Result};

/// Gauss–Legendre rule on `[-1, 1]` with `n` nodes, nodes ascending.
///
/// Nodes are refined by Newton iteration on the three-term recurrence for
/// `P_n`, starting from the Tricomi approximation.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
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
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
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

/// Rule on `[0, π]` in the angle variable.
fn angle_rule(order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let half = 0.5 * PI;
    let theta = x.iter().map(|&t| half * (t + 1.0)).collect();
    let weights = w.iter().map(|&v| half * v).collect();
    (theta, weights)
}

/// `∫_a^b g(x) dx` after `x = (a+b)/2 + (b−a)/2·cos θ`.
///
/// The substitution turns square-root edge behaviour of `g` into a smooth
/// integrand in `θ`.
pub fn chebyshev_substituted_integral(a: f64, b: f64, g: impl Fn(f64) -> f64, order: usize) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let (theta, w) = angle_rule(order);
    theta
        .iter()
        .zip(&w)
        .map(|(&t, &wt)| wt * g(mid + half * t.cos()) * half * t.sin())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Gauss–Legendre nodes per axis in the angle variable.
    pub order: usize,
    /// Below this node separation the divided difference becomes `φ′`.
    pub diag_threshold: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            order: 200,
            diag_threshold: 1e-8,
        }
    }
}

impl QuadratureSpec {
    pub fn new(order: usize, diag_threshold: f64) -> Result<Self> {
        if order < 8 {
            return Err(Error::InvalidParameter(format!(
                "quadrature order must be at least 8, got {order}"
            )));
        }
        if diag_threshold.is_nan() || diag_threshold <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "diagonal threshold must be positive, got {diag_threshold}"
            )));
        }
        Ok(Self {
            order,
            diag_threshold,
        })
    }
}

/// Limiting variance of a centred linear eigenvalue statistic, split into
/// its two contributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceBreakdown {
    /// `(1/2π²)∬ (Δφ/Δλ)²·(4 − λ₁λ₂)/(√(4−λ₁²)√(4−λ₂²))`.
    pub double_integral: f64,
    /// `∫ φ(μ)μ/√(4 − μ²) dμ`.
    pub kappa_integral: f64,
    /// `(κ₄/4π²)·kappa_integral²`.
    pub kappa_term: f64,
    pub total: f64,
}

struct Nodes {
    lambda: Vec<f64>,
    weight: Vec<f64>,
    phi: Vec<f64>,
    dphi: Vec<f64>,
}

impl Nodes {
    fn new(phi: &TestFunction, order: usize) -> Self {
        let (theta, weight) = angle_rule(order);
        let lambda: Vec<f64> = theta.iter().map(|t| 2.0 * t.cos()).collect();
        let values = lambda.iter().map(|&l| phi.value(l)).collect();
        let dphi = lambda.iter().map(|&l| phi.derivative(l)).collect();
        Self {
            lambda,
            weight,
            phi: values,
            dphi,
        }
    }

    fn pair(&self, i: usize, j: usize, threshold: f64) -> f64 {
        let (li, lj) = (self.lambda[i], self.lambda[j]);
        let dd = if (li - lj).abs() < threshold {
            self.dphi[i]
        } else {
            (self.phi[i] - self.phi[j]) / (li - lj)
        };
        self.weight[i] * self.weight[j] * dd * dd * (4.0 - li * lj)
    }

    /// Double sum with `i` outer (or `j` outer when `transposed`).
    fn double_sum(&self, threshold: f64, transposed: bool) -> f64 {
        let n = self.lambda.len();
        let mut total = 0.0;
        for a in 0..n {
            let mut row = 0.0;
            for b in 0..n {
                row += if transposed {
                    self.pair(b, a, threshold)
                } else {
                    self.pair(a, b, threshold)
                };
            }
            total += row;
        }
        total / (2.0 * PI * PI)
    }
}

/// Limiting variance `V[φ]` of `Σφ(λᵢ) − E Σφ(λᵢ)` for fourth cumulant
/// `kappa4`, computed in the angle variable `λ = 2cos θ` where
/// `dλ/√(4 − λ²) = dθ` and both integrals become smooth.
pub fn variance_functional(
    phi: &TestFunction,
    kappa4: f64,
    quad: QuadratureSpec,
) -> Result<VarianceBreakdown> {
    let quad = QuadratureSpec::new(quad.order, quad.diag_threshold)?;
    let nodes = Nodes::new(phi, quad.order);
    if let Some(bad) = nodes.phi.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "test function {} is not finite on [-2, 2] (value {bad})",
            phi.name()
        )));
    }
    let double_integral = nodes.double_sum(quad.diag_threshold, false);
    let kappa_integral: f64 = nodes
        .lambda
        .iter()
        .zip(&nodes.weight)
        .zip(&nodes.phi)
        .map(|((&l, &w), &p)| w * p * l)
        .sum();
    let kappa_term = kappa4 / (4.0 * PI * PI) * kappa_integral * kappa_integral;
    Ok(VarianceBreakdown {
        double_integral,
        kappa_integral,
        kappa_term,
        total: double_integral + kappa_term,
    })
}

#[cfg(test)]
pub(crate) fn double_integral_transposed(phi: &TestFunction, quad: QuadratureSpec) -> f64 {
    Nodes::new(phi, quad.order).double_sum(quad.diag_threshold, true)
}
