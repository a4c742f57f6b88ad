//! Closed-form spectral quantities of the limiting semicircle law.
//!
//! Everything here is a pure function of its arguments. Variance is fixed at
//! one throughout: the semicircle is supported on `[-2, 2]` and the
//! Marčenko–Pastur law uses unit scale.

mod quadrature;
mod test_function;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::{Error, Result};

pub use quadrature::{
    chebyshev_substituted_integral, gauss_legendre, variance_functional, QuadratureSpec,
    VarianceBreakdown,
};
pub use test_function::{RealMap, TestFunction};

/// A point `z = E + iη` of the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexPoint {
    pub re: f64,
    pub im: f64,
}

impl ComplexPoint {
    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    /// Purely imaginary point `iη`.
    pub const fn imaginary(im: f64) -> Self {
        Self { re: 0.0, im }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Returns `self` if it lies strictly in the upper half plane.
    pub fn upper(self) -> Result<Self> {
        if self.im > 0.0 && self.im.is_finite() && self.re.is_finite() {
            Ok(self)
        } else {
            Err(Error::NonPositiveImaginary(self.im))
        }
    }
}

impl From<ComplexPoint> for Complex64 {
    fn from(z: ComplexPoint) -> Self {
        z.to_complex()
    }
}

impl std::fmt::Display for ComplexPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{:+}i", self.re, self.im)
    }
}

/// Semicircle density `(1/2π)√(4 − x²)` on `[-2, 2]`.
pub fn semicircle_density(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        return 0.0;
    }
    (4.0 - x * x).sqrt() / (2.0 * PI)
}

/// Edges `(a, b)` of the Marčenko–Pastur support for aspect ratio `y`.
pub fn mp_support(y: f64) -> Result<(f64, f64)> {
    if !(y > 0.0 && y <= 1.0) {
        return Err(Error::InvalidAspectRatio(y));
    }
    let s = y.sqrt();
    Ok(((1.0 - s) * (1.0 - s), (1.0 + s) * (1.0 + s)))
}

/// Marčenko–Pastur density for aspect ratio `0 < y ≤ 1`.
pub fn mp_density(x: f64, y: f64) -> Result<f64> {
    let (a, b) = mp_support(y)?;
    if x <= a || x >= b {
        return Ok(0.0);
    }
    Ok(((b - x) * (x - a)).sqrt() / (2.0 * PI * x * y))
}

/// Stieltjes transform `f(z)` of the semicircle law.
///
/// `f` is a root of `f² + z f + 1 = 0`. The two roots multiply to one, so the
/// root of larger modulus is formed without cancellation and the other one is
/// its reciprocal; the root with positive imaginary part is returned.
pub fn semicircle_stieltjes(z: ComplexPoint) -> Result<Complex64> {
    let z = z.upper()?.to_complex();
    let s = (z * z - 4.0).sqrt();
    let plus = (-z + s) * 0.5;
    let minus = (-z - s) * 0.5;
    let large = if plus.norm_sqr() >= minus.norm_sqr() {
        plus
    } else {
        minus
    };
    let small = large.inv();
    Ok(if small.im > 0.0 { small } else { large })
}

/// `|f + 1/(z + f)|`, the defect of the fixed-point equation `f = −1/(z + f)`.
pub fn self_consistency_residual(z: ComplexPoint, f_value: Complex64) -> Result<f64> {
    let z = z.upper()?.to_complex();
    let denom = z + f_value;
    if denom.norm() < 1e-14 {
        return Err(Error::DegenerateDenominator(denom.norm()));
    }
    Ok((f_value + denom.inv()).norm())
}

/// The three terms of the asymptotic expansion of `f_N(z) = E m_N(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionTerms {
    /// `f(z)`.
    pub leading: Complex64,
    /// `−√(N/M)·f⁴/(1 − f²)`.
    pub first_order: Complex64,
    /// `(1/N)·f·(f²/(1 − f²)² + κ₄·f²/(1 − f²))`.
    pub second_order: Complex64,
    pub total: Complex64,
}

impl ExpansionTerms {
    /// Partial sum keeping the first `terms` pieces (0, 1, 2 or 3).
    pub fn partial(&self, terms: usize) -> Complex64 {
        match terms {
            0 => Complex64::new(0.0, 0.0),
            1 => self.leading,
            2 => self.leading + self.first_order,
            _ => self.total,
        }
    }
}

/// Edge guard for [`expansion_prediction`].
pub const EDGE_GUARD: f64 = 1e-10;

/// Two-term expansion of `E m_N(z)` for the `N × N` renormalized matrix built
/// from `M × N` data with fourth cumulant `kappa4`.
pub fn expansion_prediction(
    z: ComplexPoint,
    n: usize,
    m: usize,
    kappa4: f64,
) -> Result<ExpansionTerms> {
    if n < 2 || m < n {
        return Err(Error::InvalidDimensions(format!(
            "expansion needs N >= 2 and M >= N, got N = {n}, M = {m}"
        )));
    }
    let f = semicircle_stieltjes(z)?;
    let f2 = f * f;
    let gap = 1.0 - f2;
    if gap.norm() < EDGE_GUARD {
        return Err(Error::NearSpectralEdge(gap.norm()));
    }
    let ratio = (n as f64 / m as f64).sqrt();
    let first_order = -f * f2 * f * ratio / gap;
    let second_order = f * (f2 / (gap * gap) + kappa4 * f2 / gap) / n as f64;
    Ok(ExpansionTerms {
        leading: f,
        first_order,
        second_order,
        total: f + first_order + second_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn semicircle_density_values() {
        assert_eq!(semicircle_density(2.0), 0.0);
        assert_eq!(semicircle_density(3.0), 0.0);
        assert!((semicircle_density(0.0) - std::f64::consts::FRAC_1_PI).abs() < 1e-15);
    }

    #[test]
    fn mp_density_values() {
        let v = mp_density(1.0, 1.0).unwrap();
        assert!((v - 3f64.sqrt() / (2.0 * PI)).abs() < 1e-15);
        assert!((v - 0.275_664_4).abs() < 1e-7);
        assert_eq!(mp_density(4.0, 1.0).unwrap(), 0.0);
        assert_eq!(mp_density(0.2, 0.25).unwrap(), 0.0);
        assert!(mp_density(1.0, 0.0).is_err());
        assert!(mp_density(1.0, 1.5).is_err());
    }

    /// Fixed-point iteration of `f = −1/(z + f)` converges to the
    /// transform in the upper half plane; used as an independent route.
    fn fixed_point(z: Complex64) -> Complex64 {
        let mut f = Complex64::new(0.0, 1.0);
        for _ in 0..2000 {
            f = -(z + f).inv();
        }
        f
    }

    #[test]
    fn stieltjes_closed_form_points() {
        let f = semicircle_stieltjes(ComplexPoint::imaginary(2.0)).unwrap();
        assert!(f.re.abs() < 1e-15);
        assert!((f.im - (SQRT2 - 1.0)).abs() < 1e-15);
        assert!((f - fixed_point(Complex64::new(0.0, 2.0))).norm() < 1e-12);

        let f = semicircle_stieltjes(ComplexPoint::imaginary(1.0)).unwrap();
        assert!((f.im - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        assert!((f - fixed_point(Complex64::new(0.0, 1.0))).norm() < 1e-12);
    }

    #[test]
    fn stieltjes_decays_at_infinity() {
        let z = ComplexPoint::imaginary(1e6);
        let f = semicircle_stieltjes(z).unwrap();
        let approx = -z.to_complex().inv();
        assert!((f - approx).norm() / approx.norm() <= 1e-11);
    }

    #[test]
    fn stieltjes_rejects_lower_half_plane() {
        assert_eq!(
            semicircle_stieltjes(ComplexPoint::new(1.0, 0.0)),
            Err(Error::NonPositiveImaginary(0.0))
        );
        assert!(semicircle_stieltjes(ComplexPoint::new(1.0, -1.0)).is_err());
    }

    #[test]
    fn stieltjes_near_real_axis_matches_density() {
        let eta = 1e-4;
        let mut worst: f64 = 0.0;
        for i in 0..=380 {
            let x = -1.9 + 0.01 * i as f64;
            let f = semicircle_stieltjes(ComplexPoint::new(x, eta)).unwrap();
            worst = worst.max((f.im / PI - semicircle_density(x)).abs());
        }
        assert!(worst <= 1e-3, "gap {worst}");
    }

    #[test]
    fn self_consistency_values() {
        let z = ComplexPoint::imaginary(2.0);
        let r = self_consistency_residual(z, Complex64::new(0.0, 0.414_213_6)).unwrap();
        assert!(r < 1e-6);
        let r = self_consistency_residual(z, Complex64::new(0.0, 0.0)).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
        let r = self_consistency_residual(
            ComplexPoint::imaginary(1.0),
            Complex64::new(0.0, 0.618_034_0),
        )
        .unwrap();
        assert!(r < 1e-6);
        assert!(matches!(
            self_consistency_residual(z, Complex64::new(0.0, -2.0)),
            Err(Error::DegenerateDenominator(_))
        ));
    }

    #[test]
    fn expansion_at_two_i() {
        let t = expansion_prediction(ComplexPoint::imaginary(2.0), 100, 10_000, 0.0).unwrap();
        assert!((t.total.re - -0.002_512_6).abs() < 5e-8, "{:?}", t.total);
        assert!((t.total.im - 0.413_695_8).abs() < 5e-8, "{:?}", t.total);
        // f²/(1 − f²)² is exactly −1/8 at z = 2i
        let f = t.leading;
        let g = f * f / ((1.0 - f * f) * (1.0 - f * f));
        assert!((g - Complex64::new(-0.125, 0.0)).norm() < 1e-15);
        assert_eq!(t.total, t.leading + t.first_order + t.second_order);
        let bracket = t.total / t.leading;
        assert!((bracket.re - 0.998_75).abs() < 1e-12);
        assert!((bracket.im - 0.006_066_0).abs() < 1e-7);
    }

    #[test]
    fn expansion_first_order_magnitude() {
        let z = ComplexPoint::imaginary(2.0);
        let t = expansion_prediction(z, 100, 100_000_000, 0.0).unwrap();
        assert!((t.first_order.norm() - 2.5127e-5).abs() < 1e-9);
        let t = expansion_prediction(z, 64, 4096, 0.0).unwrap();
        assert!((t.first_order.norm() - 3.1408e-3).abs() < 1e-7);
    }

    #[test]
    fn expansion_corrections_vanish_in_the_limit() {
        let z = ComplexPoint::imaginary(2.0);
        let f = semicircle_stieltjes(z).unwrap();
        let t = expansion_prediction(z, 1 << 20, 1 << 62, -2.0).unwrap();
        assert!((t.total - f).norm() < 1e-6);
    }

    #[test]
    fn expansion_rejects_bad_input() {
        assert!(expansion_prediction(ComplexPoint::imaginary(2.0), 1, 10, 0.0).is_err());
        assert!(expansion_prediction(ComplexPoint::imaginary(2.0), 10, 5, 0.0).is_err());
        assert!(matches!(
            expansion_prediction(ComplexPoint::new(2.0, 1e-24), 10, 100, 0.0),
            Err(Error::NearSpectralEdge(_))
        ));
    }
}
