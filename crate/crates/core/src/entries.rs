//! Standardized entry laws and the operators acting on raw entries.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistKind {
    Gaussian,
    Rademacher,
    /// Uniform on `[−√3, √3]`.
    Uniform,
    /// Standardized Bernoulli(p): `(B − p)/√(p(1 − p))`.
    TwoPoint(f64),
}

/// A mean-zero, unit-variance scalar law with its first eight moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryDistribution {
    kind: DistKind,
    moments: [f64; 8],
    kappa4: f64,
}

impl EntryDistribution {
    fn from_moments(kind: DistKind, moments: [f64; 8]) -> Self {
        Self {
            kind,
            moments,
            kappa4: moments[3] - 3.0,
        }
    }

    pub fn gaussian() -> Self {
        Self::from_moments(
            DistKind::Gaussian,
            [0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0],
        )
    }

    pub fn rademacher() -> Self {
        Self::from_moments(
            DistKind::Rademacher,
            [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
        )
    }

    /// Uniform on `[−√3, √3]`: even moments `3^k/(2k + 1)`.
    pub fn uniform() -> Self {
        Self::from_moments(
            DistKind::Uniform,
            [0.0, 1.0, 0.0, 9.0 / 5.0, 0.0, 27.0 / 7.0, 0.0, 9.0],
        )
    }

    /// Standardized asymmetric Bernoulli with success probability `p`.
    pub fn two_point(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "two_point probability must lie in (0, 1), got {p}"
            )));
        }
        let (hi, lo) = two_point_atoms(p);
        let mut moments = [0.0; 8];
        for (k, m) in moments.iter_mut().enumerate() {
            let e = k as i32 + 1;
            *m = p * hi.powi(e) + (1.0 - p) * lo.powi(e);
        }
        // exact by construction
        moments[0] = 0.0;
        moments[1] = 1.0;
        Ok(Self::from_moments(DistKind::TwoPoint(p), moments))
    }

    pub fn kind(&self) -> DistKind {
        self.kind
    }

    /// `ω₁..ω₈` (index 0 holds `ω₁`).
    pub fn exact_moments(&self) -> [f64; 8] {
        self.moments
    }

    pub fn moment(&self, order: usize) -> f64 {
        assert!((1..=8).contains(&order), "moment order {order} not stored");
        self.moments[order - 1]
    }

    pub fn kappa4(&self) -> f64 {
        self.kappa4
    }

    /// `κ₁..κ₄` of the law.
    pub fn cumulants(&self) -> [f64; 4] {
        let m = &self.moments;
        cumulants_from_moments([m[0], m[1], m[2], m[3]])
    }

    /// Draws `count` i.i.d. values.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        let mut out = vec![0.0; count];
        self.sample_into(rng, &mut out);
        out
    }

    /// Fills `out` with i.i.d. draws.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self.kind {
            DistKind::Gaussian => {
                for v in out.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
            }
            DistKind::Rademacher => {
                for chunk in out.chunks_mut(64) {
                    let mut bits: u64 = rng.random();
                    for v in chunk {
                        *v = if bits & 1 == 1 { 1.0 } else { -1.0 };
                        bits >>= 1;
                    }
                }
            }
            DistKind::Uniform => {
                let s3 = 3f64.sqrt();
                for v in out.iter_mut() {
                    let u: f64 = rng.random();
                    *v = (2.0 * u - 1.0) * s3;
                }
            }
            DistKind::TwoPoint(p) => {
                let (hi, lo) = two_point_atoms(p);
                for v in out.iter_mut() {
                    let u: f64 = rng.random();
                    *v = if u < p { hi } else { lo };
                }
            }
        }
    }
}

fn two_point_atoms(p: f64) -> (f64, f64) {
    (((1.0 - p) / p).sqrt(), -(p / (1.0 - p)).sqrt())
}

impl fmt::Display for EntryDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DistKind::Gaussian => f.write_str("gaussian"),
            DistKind::Rademacher => f.write_str("rademacher"),
            DistKind::Uniform => f.write_str("uniform"),
            DistKind::TwoPoint(p) => write!(f, "two_point:{p}"),
        }
    }
}

impl FromStr for EntryDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(Self::gaussian()),
            "rademacher" => Ok(Self::rademacher()),
            "uniform" => Ok(Self::uniform()),
            other => match other.strip_prefix("two_point:") {
                Some(p) => {
                    let p: f64 = p.parse().map_err(|_| {
                        Error::InvalidParameter(format!("malformed two_point probability {p:?}"))
                    })?;
                    Self::two_point(p)
                }
                None => Err(Error::InvalidParameter(format!(
                    "unknown distribution {other:?} (expected gaussian, rademacher, uniform or two_point:p)"
                ))),
            },
        }
    }
}

/// Cumulants `κ₁..κ₄` from raw moments `m₁..m₄`.
pub fn cumulants_from_moments(m: [f64; 4]) -> [f64; 4] {
    let [m1, m2, m3, m4] = m;
    [
        m1,
        m2 - m1 * m1,
        m3 - 3.0 * m1 * m2 + 2.0 * m1.powi(3),
        m4 - 4.0 * m1 * m3 - 3.0 * m2 * m2 + 12.0 * m1 * m1 * m2 - 6.0 * m1.powi(4),
    ]
}

/// Raw moments `m₁..m₄` from cumulants `κ₁..κ₄`.
pub fn moments_from_cumulants(k: [f64; 4]) -> [f64; 4] {
    let [k1, k2, k3, k4] = k;
    [
        k1,
        k2 + k1 * k1,
        k3 + 3.0 * k2 * k1 + k1.powi(3),
        k4 + 4.0 * k3 * k1 + 3.0 * k2 * k2 + 6.0 * k2 * k1 * k1 + k1.powi(4),
    ]
}

/// Truncation level `τ = (MN)^{1/4 − t}` for raw entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationSpec {
    pub t: f64,
    pub tau: f64,
}

impl TruncationSpec {
    pub fn new(m: usize, n: usize, t: f64) -> Result<Self> {
        if !(t > 0.0 && t < 0.25) {
            return Err(Error::InvalidTruncationExponent(t));
        }
        if n < 1 || m < n {
            return Err(Error::InvalidDimensions(format!(
                "truncation needs M >= N >= 1, got M = {m}, N = {n}"
            )));
        }
        let mn = m as f64 * n as f64;
        Ok(Self {
            t,
            tau: mn.powf(0.25 - t),
        })
    }
}

pub fn truncation_threshold(m: usize, n: usize, t: f64) -> Result<TruncationSpec> {
    TruncationSpec::new(m, n, t)
}

/// Zeroes every value with `|v| > tau`, then subtracts the batch mean.
pub fn truncate_recenter(values: &[f64], tau: f64) -> Vec<f64> {
    let mut out = values.to_vec();
    truncate_recenter_in_place(&mut out, tau);
    out
}

/// In-place form of [`truncate_recenter`]; returns the subtracted mean.
pub fn truncate_recenter_in_place(values: &mut [f64], tau: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    for v in values.iter_mut() {
        if v.abs() > tau {
            *v = 0.0;
        }
    }
    let n = values.len() as f64;
    let mut shift = 0.0;
    // second pass removes the rounding left by the first
    for _ in 0..2 {
        let mean = values.iter().sum::<f64>() / n;
        values.iter_mut().for_each(|v| *v -= mean);
        shift += mean;
    }
    shift
}

/// Empirical raw moments `m₁..m₄` of a batch before and after
/// truncate-and-recenter, for reporting the moment drift it induces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentDrift {
    pub before: [f64; 4],
    pub after: [f64; 4],
    pub clipped: usize,
}

pub fn moment_drift(values: &[f64], tau: f64) -> MomentDrift {
    let clipped = values.iter().filter(|v| v.abs() > tau).count();
    let after = truncate_recenter(values, tau);
    MomentDrift {
        before: raw_moments(values),
        after: raw_moments(&after),
        clipped,
    }
}

fn raw_moments(values: &[f64]) -> [f64; 4] {
    let n = values.len().max(1) as f64;
    let mut m = [0.0; 4];
    for &v in values {
        let v2 = v * v;
        m[0] += v;
        m[1] += v2;
        m[2] += v2 * v;
        m[3] += v2 * v2;
    }
    m.map(|s| s / n)
}

/// A complex function of a real variable with derivatives up to order 4.
pub trait SmoothMap {
    fn derivative(&self, order: usize, t: f64) -> Complex64;

    fn value(&self, t: f64) -> Complex64 {
        self.derivative(0, t)
    }
}

/// `g(t) = 1/(t − z₀)` with `Im z₀ ≠ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolventMap {
    pub z0: Complex64,
}

impl Default for ResolventMap {
    fn default() -> Self {
        Self {
            z0: Complex64::new(0.0, 3.0),
        }
    }
}

impl SmoothMap for ResolventMap {
    fn derivative(&self, order: usize, t: f64) -> Complex64 {
        // g⁽ᵃ⁾(t) = (−1)^a a! (t − z₀)^{−(a+1)}
        let base = (Complex64::new(t, 0.0) - self.z0).inv();
        let mut coeff = 1.0;
        for a in 1..=order {
            coeff *= -(a as f64);
        }
        base.powi(order as i32 + 1) * coeff
    }
}

/// Polynomial `Σ cₖ tᵏ` with complex coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialMap {
    pub coeffs: Vec<Complex64>,
}

impl PolynomialMap {
    pub fn real(coeffs: &[f64]) -> Self {
        Self {
            coeffs: coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect(),
        }
    }
}

impl SmoothMap for PolynomialMap {
    fn derivative(&self, order: usize, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &c) in self.coeffs.iter().enumerate().skip(order).rev() {
            let falling: f64 = ((k - order + 1)..=k).map(|j| j as f64).product();
            acc = acc * t + c * falling;
        }
        acc
    }
}

/// Outcome of a Monte Carlo check of the generalized Stein expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteinCheck {
    /// MC estimate of `E{ξ g(ξ)}`.
    pub lhs: Complex64,
    /// MC estimate of `Σ_{a ≤ p} κ_{a+1}/a! · E{g⁽ᵃ⁾(ξ)}`.
    pub rhs: Complex64,
    /// `|lhs − rhs|`.
    pub residual: f64,
    /// Standard error of `lhs`.
    pub lhs_stderr: f64,
    /// Standard error of the per-draw difference whose mean is `lhs − rhs`.
    pub diff_stderr: f64,
}

/// Compares both sides of the Stein expansion of order `p` on the same
/// `mc_size` draws.
pub fn stein_expansion_residual<R: Rng + ?Sized>(
    dist: &EntryDistribution,
    g: &dyn SmoothMap,
    p: usize,
    mc_size: usize,
    rng: &mut R,
) -> Result<SteinCheck> {
    if !(1..=3).contains(&p) {
        return Err(Error::UnsupportedOrder(p));
    }
    if mc_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "Stein check needs at least two draws, got {mc_size}"
        )));
    }
    let kappa = dist.cumulants();
    let weights: Vec<f64> = (0..=p)
        .map(|a| kappa[a] / (1..=a).map(|j| j as f64).product::<f64>())
        .collect();

    let draws = dist.sample(rng, mc_size);
    let mut lhs = ComplexMoments::default();
    let mut rhs = ComplexMoments::default();
    let mut diff = ComplexMoments::default();
    for &x in &draws {
        let left = g.value(x) * x;
        let right: Complex64 = weights
            .iter()
            .enumerate()
            .map(|(a, &w)| g.derivative(a, x) * w)
            .sum();
        lhs.push(left);
        rhs.push(right);
        diff.push(left - right);
    }
    let (lhs_mean, rhs_mean) = (lhs.mean(), rhs.mean());
    Ok(SteinCheck {
        lhs: lhs_mean,
        rhs: rhs_mean,
        residual: (lhs_mean - rhs_mean).norm(),
        lhs_stderr: lhs.stderr(),
        diff_stderr: diff.stderr(),
    })
}

#[derive(Default)]
struct ComplexMoments {
    n: f64,
    sum: Complex64,
    sum_sq_re: f64,
    sum_sq_im: f64,
}

impl ComplexMoments {
    fn push(&mut self, v: Complex64) {
        self.n += 1.0;
        self.sum += v;
        self.sum_sq_re += v.re * v.re;
        self.sum_sq_im += v.im * v.im;
    }

    fn mean(&self) -> Complex64 {
        self.sum / self.n
    }

    fn stderr(&self) -> f64 {
        let m = self.mean();
        let var = (self.sum_sq_re / self.n - m.re * m.re).max(0.0)
            + (self.sum_sq_im / self.n - m.im * m.im).max(0.0);
        (var * self.n / (self.n - 1.0) / self.n).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn stored_moments() {
        let g = EntryDistribution::gaussian().exact_moments();
        assert_eq!((g[3], g[5], g[7]), (3.0, 15.0, 105.0));
        // Gaussian recursion ω_{k+2} = (k+1) ω_k
        let mut w = 1.0;
        for k in (2..=8).step_by(2) {
            assert_eq!(g[k - 1], w);
            w *= (k + 1) as f64;
        }
        assert_eq!(EntryDistribution::rademacher().kappa4(), -2.0);
        let u = EntryDistribution::uniform();
        assert!((u.moment(4) - 1.8).abs() < 1e-15);
        assert!((u.kappa4() + 1.2).abs() < 1e-15);
        let tp = EntryDistribution::two_point(0.2).unwrap();
        assert!(tp.moment(1).abs() < 1e-15 && (tp.moment(2) - 1.0).abs() < 1e-15);
        // ω₃ = (1 − 2p)/√(p(1−p)), ω₄ = (1 − 3p + 3p²)/(p(1 − p))
        assert!((tp.moment(3) - 0.6 / 0.4).abs() < 1e-12);
        assert!((tp.moment(4) - 0.52 / 0.16).abs() < 1e-12);
        for d in [
            EntryDistribution::gaussian(),
            EntryDistribution::rademacher(),
            u,
            tp,
        ] {
            assert_eq!(d.kappa4(), d.moment(4) - 3.0);
            assert!(d.moment(4) >= 1.0);
            assert!((d.cumulants()[3] - d.kappa4()).abs() < 1e-12);
        }
        assert!(EntryDistribution::two_point(1.0).is_err());
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["gaussian", "rademacher", "uniform", "two_point:0.2"] {
            let d: EntryDistribution = s.parse().unwrap();
            assert_eq!(d.to_string(), s);
        }
        assert!("cauchy".parse::<EntryDistribution>().is_err());
        assert!("two_point:x".parse::<EntryDistribution>().is_err());
    }

    #[test]
    fn sampling_edge_cases() {
        let mut rng = stream(1, 0);
        assert!(EntryDistribution::gaussian().sample(&mut rng, 0).is_empty());
        let a = EntryDistribution::rademacher().sample(&mut stream(5, 2), 100);
        let b = EntryDistribution::rademacher().sample(&mut stream(5, 2), 100);
        assert_eq!(a, b);
        assert!(a.iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn rademacher_sample_moments() {
        let x = EntryDistribution::rademacher().sample(&mut stream(11, 0), 1_000_000);
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 0.004, "{mean}");
        assert!((var - 1.0).abs() <= 0.006, "{var}");
    }

    #[test]
    fn uniform_fourth_moment() {
        let x = EntryDistribution::uniform().sample(&mut stream(12, 0), 1_000_000);
        let m4 = x.iter().map(|v| v.powi(4)).sum::<f64>() / x.len() as f64;
        assert!((m4 - 1.8).abs() <= 0.01, "{m4}");
    }

    #[test]
    fn cumulant_examples() {
        assert_eq!(
            cumulants_from_moments([0.0, 1.0, 0.0, 3.0]),
            [0.0, 1.0, 0.0, 0.0]
        );
        assert_eq!(
            cumulants_from_moments([0.0, 1.0, 0.0, 1.0]),
            [0.0, 1.0, 0.0, -2.0]
        );
        assert_eq!(
            cumulants_from_moments([1.0, 1.0, 1.0, 1.0]),
            [1.0, 0.0, 0.0, 0.0]
        );
    }

    #[test]
    fn truncation_thresholds() {
        let t = truncation_threshold(16, 16, 1e-12).unwrap();
        assert!((t.tau - 4.0).abs() < 1e-9);
        let t = truncation_threshold(16, 16, 0.05).unwrap();
        assert!((t.tau - 256f64.powf(0.2)).abs() < 1e-12);
        assert!((t.tau - 3.031_43).abs() < 1e-5);
        let t = truncation_threshold(10_000, 100, 0.01).unwrap();
        assert!((t.tau - 10f64.powf(1.44)).abs() < 1e-9);
        assert!((t.tau - 27.542).abs() < 1e-3);
        assert!(t.tau < (1e6f64).powf(0.25) * 100.0);
        for bad in [0.0, 0.25, -0.1, 0.3] {
            assert_eq!(
                truncation_threshold(16, 16, bad),
                Err(Error::InvalidTruncationExponent(bad))
            );
        }
    }

    #[test]
    fn truncate_recenter_examples() {
        assert_eq!(
            truncate_recenter(&[5.0, -1.0, 1.0], 2.0),
            vec![0.0, -1.0, 1.0]
        );
        assert_eq!(truncate_recenter(&[3.0], 2.0), vec![0.0]);
        assert_eq!(truncate_recenter(&[1.0; 4], 2.0), vec![0.0; 4]);
        assert!(truncate_recenter(&[], 2.0).is_empty());
    }

    #[test]
    fn moment_drift_reports_clipping() {
        let d = moment_drift(&[5.0, -1.0, 1.0, 0.5], 2.0);
        assert_eq!(d.clipped, 1);
        assert!(d.after[0].abs() < 1e-15);
        assert!(d.before[1] > d.after[1]);
    }

    #[test]
    fn polynomial_derivatives() {
        // g(t) = 1 + 2t + 3t² + 4t³
        let g = PolynomialMap::real(&[1.0, 2.0, 3.0, 4.0]);
        let t = 0.5;
        assert_eq!(g.derivative(0, t).re, 1.0 + 1.0 + 0.75 + 0.5);
        assert_eq!(g.derivative(1, t).re, 2.0 + 3.0 + 3.0);
        assert_eq!(g.derivative(2, t).re, 6.0 + 12.0);
        assert_eq!(g.derivative(3, t).re, 24.0);
        assert_eq!(g.derivative(4, t).re, 0.0);
    }

    #[test]
    fn resolvent_map_derivatives_match_differences() {
        let g = ResolventMap::default();
        let h = 1e-5;
        for order in 0..3 {
            let fd = (g.derivative(order, 0.3 + h) - g.derivative(order, 0.3 - h)) / (2.0 * h);
            assert!((fd - g.derivative(order + 1, 0.3)).norm() < 1e-8);
        }
    }

    #[test]
    fn stein_identity_for_gaussian_polynomials() {
        let dist = EntryDistribution::gaussian();
        let cases: [&[f64]; 3] = [&[0.0, 1.0], &[0.0, 0.0, 1.0], &[0.5, -1.0, 2.0, 0.7]];
        for (i, coeffs) in cases.iter().enumerate() {
            let g = PolynomialMap::real(coeffs);
            let c =
                stein_expansion_residual(&dist, &g, 1, 200_000, &mut stream(3, i as u64)).unwrap();
            assert!(c.residual <= 5.0 * c.diff_stderr.max(1e-15), "{c:?}");
        }
    }

    #[test]
    fn stein_rademacher_resolvent_against_closed_form() {
        // Two-point law: every expectation is the average over ξ = ±1.
        let g = ResolventMap::default();
        let avg = |order: usize| (g.derivative(order, 1.0) + g.derivative(order, -1.0)) * 0.5;
        let exact_lhs = (g.value(1.0) - g.value(-1.0)) * 0.5;
        assert!((exact_lhs - Complex64::new(0.1, 0.0)).norm() < 1e-15);
        let exact_rhs = avg(1) + avg(3) * (-2.0 / 6.0);
        let exact_residual = (exact_lhs - exact_rhs).norm();
        // κ₆ and higher cumulants leave a deterministic remainder
        assert!((exact_residual - 0.0144).abs() < 1e-12);

        let c = stein_expansion_residual(
            &EntryDistribution::rademacher(),
            &g,
            3,
            1_000_000,
            &mut stream(9, 0),
        )
        .unwrap();
        assert!((c.lhs - exact_lhs).norm() <= 5.0 * c.lhs_stderr);
        assert!((c.residual - exact_residual).abs() <= 5.0 * c.diff_stderr);
    }

    #[test]
    fn stein_rejects_unsupported_order() {
        let g = ResolventMap::default();
        let mut rng = stream(0, 0);
        assert_eq!(
            stein_expansion_residual(&EntryDistribution::gaussian(), &g, 4, 10, &mut rng),
            Err(Error::UnsupportedOrder(4))
        );
        assert!(
            stein_expansion_residual(&EntryDistribution::gaussian(), &g, 0, 10, &mut rng).is_err()
        );
    }
}
