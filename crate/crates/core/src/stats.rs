//! Streaming moments and the one-sample Kolmogorov–Smirnov statistic.

use statrs::function::erf::erfc;

use crate::{Error, Result};

/// Count, mean and central power sums up to order four, plus extrema.
///
/// Two accumulators merge exactly (up to rounding) into the accumulator of
/// the concatenated data, so partial results can be combined in any fixed
/// order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
    min: f64,
    max: f64,
}

impl Default for RunningStats {
    fn default() -> Self {
        Self::new()
    }
}

impl RunningStats {
    pub const fn new() -> Self {
        Self {
            count: 0,
            mean: 0.0,
            m2: 0.0,
            m3: 0.0,
            m4: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    pub fn single(x: f64) -> Self {
        Self {
            count: 1,
            mean: x,
            m2: 0.0,
            m3: 0.0,
            m4: 0.0,
            min: x,
            max: x,
        }
    }

    pub fn from_slice(values: &[f64]) -> Self {
        let mut s = Self::new();
        values.iter().for_each(|&v| s.push(v));
        s
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.count as f64;
        let n = n1 + 1.0;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0) + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
        self.count += 1;
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if other.count == 0 {
            return *self;
        }
        if self.count == 0 {
            return *other;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let d = other.mean - self.mean;
        let d2 = d * d;
        let mean = self.mean + d * nb / n;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + other.m3
            + d2 * d * na * nb * (na - nb) / (n * n)
            + 3.0 * d * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d2 * d2 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * d * (na * other.m3 - nb * self.m3) / n;
        Self {
            count: self.count + other.count,
            mean,
            m2,
            m3,
            m4,
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    pub fn m3(&self) -> f64 {
        self.m3
    }

    pub fn m4(&self) -> f64 {
        self.m4
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    /// Unbiased variance `m2/(n − 1)`; NaN below two observations.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        (self.m2 / (self.count as f64 - 1.0)).max(0.0)
    }

    pub fn population_variance(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        (self.m2 / self.count as f64).max(0.0)
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn stderr_mean(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }

    /// Delta-method standard error of [`variance`](Self::variance):
    /// `√((μ₄ − σ⁴(n − 3)/(n − 1))/n)` with sample central moments.
    pub fn stderr_variance(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        let n = self.count as f64;
        let mu4 = self.m4 / n;
        let s2 = self.variance();
        ((mu4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n)
            .max(0.0)
            .sqrt()
    }

    /// Sample skewness `g₁ = √n·m3/m2^{3/2}`; zero for constant data.
    pub fn skewness(&self) -> f64 {
        if self.m2 <= 0.0 {
            return 0.0;
        }
        (self.count as f64).sqrt() * self.m3 / self.m2.powf(1.5)
    }

    /// Sample excess kurtosis `g₂ = n·m4/m2² − 3`; zero for constant data.
    pub fn excess_kurtosis(&self) -> f64 {
        if self.m2 <= 0.0 {
            return 0.0;
        }
        self.count as f64 * self.m4 / (self.m2 * self.m2) - 3.0
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `sup_x |F_n(x) − F(x)|` for the empirical CDF of `samples`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i as f64 + 1.0) / n - f)
                .abs()
                .max((f - i as f64 / n).abs())
        })
        .fold(0.0, f64::max);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let s = RunningStats::from_slice(&[1.0, 4.0, -2.0]);
        assert_eq!(RunningStats::new().merge(&s), s);
        assert_eq!(s.merge(&RunningStats::new()), s);
    }

    #[test]
    fn two_point_merge() {
        let s = RunningStats::single(1.5).merge(&RunningStats::single(-0.5));
        assert_eq!(s.mean(), 0.5);
        assert_eq!(s.m2(), 2.0);
    }

    #[test]
    fn merge_matches_direct_recomputation() {
        let merged = RunningStats::from_slice(&[1.0, 2.0, 3.0])
            .merge(&RunningStats::from_slice(&[4.0, 5.0]));
        // direct central sums of 1..5 around 3: m2 = 10, m3 = 0, m4 = 34
        assert!(close(merged.mean(), 3.0, 1e-12));
        assert!(close(merged.m2(), 10.0, 1e-12));
        assert!(merged.m3().abs() < 1e-12);
        assert!(close(merged.m4(), 34.0, 1e-12));
        assert_eq!((merged.min(), merged.max()), (1.0, 5.0));
    }

    #[test]
    fn ks_examples() {
        let n = 100;
        let normal = Normal::new(0.0, 1.0).unwrap();
        let q: Vec<f64> = (0..n)
            .map(|i| normal.inverse_cdf((i as f64 + 0.5) / n as f64))
            .collect();
        let d = ks_statistic(&q, normal_cdf).unwrap();
        // statrs erfc carries ~1e-11 absolute error in the tails
        assert!((d - 0.005).abs() < 1e-9, "{d}");
        let mut shuffled = q.clone();
        shuffled.reverse();
        shuffled.swap(3, 70);
        assert_eq!(ks_statistic(&shuffled, normal_cdf).unwrap(), d);
        assert!((ks_statistic(&[0.0], normal_cdf).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(ks_statistic(&[], normal_cdf), Err(Error::EmptyInput));
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(1.96) - 0.975_002_104_851_780).abs() < 1e-11);
    }

    #[test]
    fn degenerate_shape_statistics() {
        let s = RunningStats::from_slice(&[2.0; 10]);
        assert_eq!(s.variance(), 0.0);
        assert_eq!(s.skewness(), 0.0);
        assert_eq!(s.excess_kurtosis(), 0.0);
        assert!(RunningStats::single(1.0).variance().is_nan());
    }

    proptest! {
        #[test]
        fn merge_is_associative_and_matches_concatenation(
            a in prop::collection::vec(-1e3f64..1e3, 0..40),
            b in prop::collection::vec(-1e3f64..1e3, 0..40),
            c in prop::collection::vec(-1e3f64..1e3, 0..40),
        ) {
            let (sa, sb, sc) = (
                RunningStats::from_slice(&a),
                RunningStats::from_slice(&b),
                RunningStats::from_slice(&c),
            );
            let left = sa.merge(&sb).merge(&sc);
            let right = sa.merge(&sb.merge(&sc));
            let all: Vec<f64> = a.iter().chain(&b).chain(&c).copied().collect();
            let direct = RunningStats::from_slice(&all);
            prop_assert_eq!(left.count(), direct.count());
            if direct.count() > 0 {
                let scale = direct.m2().max(1.0);
                for (x, y) in [(left, right), (left, direct)] {
                    prop_assert!(close(x.mean(), y.mean(), 1e-12));
                    prop_assert!((x.m2() - y.m2()).abs() <= 1e-12 * scale);
                    prop_assert!((x.m3() - y.m3()).abs() <= 1e-11 * scale.powf(1.5));
                    prop_assert!((x.m4() - y.m4()).abs() <= 1e-11 * scale * scale);
                }
                prop_assert!(direct.m2() >= 0.0);
            }
        }
    }
}
