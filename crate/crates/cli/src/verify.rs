//! The fast deterministic battery behind `covlab verify`.

use std::io::{self, Write};

use covlab_core::analytic::chebyshev_substituted_integral;
use covlab_core::entries::{
    cumulants_from_moments, moments_from_cumulants, stein_expansion_residual, truncation_threshold,
    PolynomialMap, ResolventMap, SmoothMap,
};
use covlab_core::matrixlab::{
    build_h, eigenvalues_sym, interlacing_violation, resolvent_derivative_check,
};
use covlab_core::mp_density;
use covlab_core::rng::stream;
use covlab_core::stats::{ks_statistic, normal_cdf};
use covlab_core::{
    expansion_prediction, semicircle_density, semicircle_stieltjes, variance_functional, Complex64,
    ComplexPoint, DataMatrix, EntryDistribution, ModelTag, QuadratureSpec, Result, RunningStats,
    TestFunction,
};
use rand::Rng;

/// Signature of the transform under test.
pub type Transform = dyn Fn(ComplexPoint) -> Result<Complex64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }
}

/// 10 × 10 points: `E ∈ [−3, 3]`, `η` log-spaced in `[10⁻², 10]`.
fn upper_grid() -> Vec<ComplexPoint> {
    let mut grid = Vec::with_capacity(100);
    for i in 0..10 {
        let eta = 10f64.powf(-2.0 + 3.0 * i as f64 / 9.0);
        for j in 0..10 {
            grid.push(ComplexPoint::new(-3.0 + 6.0 * j as f64 / 9.0, eta));
        }
    }
    grid
}

fn err_check(name: &'static str, e: covlab_core::Error) -> Check {
    Check::new(name, false, format!("error: {e}"))
}

fn branch_law(f: &Transform) -> Check {
    let mut worst = f64::INFINITY;
    for z in upper_grid() {
        match f(z) {
            Ok(v) => worst = worst.min(v.im),
            Err(e) => return err_check("branch law", e),
        }
    }
    Check::new(
        "branch law",
        worst > 0.0,
        format!("min Im f = {worst:.3e} on 100 points"),
    )
}

fn quadratic_residual(f: &Transform) -> Check {
    let mut worst: f64 = 0.0;
    for z in upper_grid() {
        let zc = z.to_complex();
        match f(z) {
            Ok(v) => worst = worst.max((v * v + zc * v + 1.0).norm()),
            Err(e) => return err_check("quadratic residual", e),
        }
    }
    Check::new(
        "quadratic residual",
        worst <= 1e-12,
        format!("max |f² + zf + 1| = {worst:.3e}"),
    )
}

fn stieltjes_decay(f: &Transform) -> Check {
    let z = ComplexPoint::imaginary(1e6);
    match f(z) {
        Ok(v) => {
            let expected = -z.to_complex().inv();
            let rel = (v - expected).norm() / expected.norm();
            Check::new(
                "transform decay",
                rel <= 1e-11,
                format!("relative gap to −1/z = {rel:.3e}"),
            )
        }
        Err(e) => err_check("transform decay", e),
    }
}

fn density_normalization() -> Check {
    let semi = chebyshev_substituted_integral(-2.0, 2.0, semicircle_density, 64);
    let mut worst = (semi - 1.0).abs();
    for y in [0.1, 0.25, 0.5, 1.0] {
        let (a, b) = ((1.0 - f64::sqrt(y)).powi(2), (1.0 + f64::sqrt(y)).powi(2));
        let mass =
            chebyshev_substituted_integral(a, b, |x| mp_density(x, y).unwrap_or(f64::NAN), 64);
        worst = worst.max((mass - 1.0).abs());
    }
    Check::new(
        "density normalization",
        worst <= 1e-10,
        format!("max |mass − 1| = {worst:.3e} (semicircle, MP y ∈ {{0.1, 0.25, 0.5, 1}})"),
    )
}

fn expansion_bracket() -> Check {
    match expansion_prediction(ComplexPoint::imaginary(2.0), 100, 10_000, 0.0) {
        Ok(t) => {
            let bracket = t.total / t.leading;
            let expected = Complex64::new(0.998_75, 0.006_066);
            let gap = (bracket - expected).norm();
            let exact_sum = t.total == t.leading + t.first_order + t.second_order;
            Check::new(
                "expansion bracket",
                gap <= 1e-5 && exact_sum,
                format!(
                    "bracket at 2i, N = 100, M = 10⁴: {:.6}{:+.6}i",
                    bracket.re, bracket.im
                ),
            )
        }
        Err(e) => err_check("expansion bracket", e),
    }
}

fn variance_quadrature() -> Check {
    let quad = QuadratureSpec::default();
    let mut worst: f64 = 0.0;
    for kappa4 in [0.0, -2.0, -1.2] {
        for (phi, exact) in [
            (TestFunction::monomial(1), 2.0 + kappa4),
            (TestFunction::monomial(2), 4.0),
        ] {
            match variance_functional(&phi, kappa4, quad) {
                Ok(v) => worst = worst.max((v.total - exact).abs()),
                Err(e) => return err_check("variance quadrature", e),
            }
        }
    }
    Check::new(
        "variance quadrature",
        worst <= 1e-6,
        format!("max |V − exact| = {worst:.3e} for x, x² and κ₄ ∈ {{0, −2, −6/5}}"),
    )
}

/// `Var(Tr H) = ω₄ − 1` from exact moments equals `V[x] = 2 + κ₄`.
fn trace_identity() -> Check {
    let mut worst: f64 = 0.0;
    for dist in [
        EntryDistribution::gaussian(),
        EntryDistribution::rademacher(),
        EntryDistribution::uniform(),
        EntryDistribution::two_point(0.2).unwrap(),
    ] {
        match variance_functional(
            &TestFunction::monomial(1),
            dist.kappa4(),
            QuadratureSpec::default(),
        ) {
            Ok(v) => worst = worst.max((v.total - (dist.moment(4) - 1.0)).abs()),
            Err(e) => return err_check("trace identity", e),
        }
    }
    Check::new(
        "trace identity",
        worst <= 1e-6,
        format!("max |V[x] − (ω₄ − 1)| = {worst:.3e} over four laws"),
    )
}

fn rademacher_trace(seed: u64) -> Check {
    let dist = EntryDistribution::rademacher();
    let mut worst: f64 = 0.0;
    for r in 0..50 {
        let built = DataMatrix::sample(24, 6, &dist, None, &mut stream(seed, r))
            .and_then(|y| eigenvalues_sym(&build_h(&y), ModelTag::SampleCov));
        match built {
            Ok(s) => worst = worst.max(s.trace().abs()),
            Err(e) => return err_check("rademacher trace", e),
        }
    }
    Check::new(
        "rademacher trace",
        worst <= 1e-12,
        format!("max |Tr H| = {worst:.3e} over 50 draws"),
    )
}

fn resolvent_derivatives(seed: u64) -> Check {
    let mut rng = stream(seed, 1);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (m, n) = (rng.random_range(4..=12), rng.random_range(2..=4));
        let (j, k) = (rng.random_range(0..m), rng.random_range(0..n));
        let check = DataMatrix::sample(m, n, &EntryDistribution::gaussian(), None, &mut rng)
            .and_then(|y| resolvent_derivative_check(&y, j, k, ComplexPoint::imaginary(2.0), 1e-5));
        match check {
            Ok(c) => worst = worst.max(c.max()),
            Err(e) => return err_check("resolvent derivatives", e),
        }
    }
    Check::new(
        "resolvent derivatives",
        worst <= 1e-5,
        format!("max finite-difference gap = {worst:.3e} over 20 draws"),
    )
}

fn interlacing(seed: u64) -> Check {
    let mut rng = stream(seed, 2);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let col = rng.random_range(0..4);
        let v = DataMatrix::sample(8, 4, &EntryDistribution::gaussian(), None, &mut rng)
            .and_then(|y| interlacing_violation(&y, col));
        match v {
            Ok(v) => worst = worst.max(v),
            Err(e) => return err_check("interlacing", e),
        }
    }
    Check::new(
        "interlacing",
        worst <= 1e-9,
        format!("max violation = {worst:.3e} over 100 instances of 8 × 4"),
    )
}

fn gaussian_stein(seed: u64) -> Check {
    let dist = EntryDistribution::gaussian();
    let mut rng = stream(seed, 3);
    let mut worst: f64 = 0.0;
    let maps: [Box<dyn SmoothMap>; 2] = [
        Box::new(ResolventMap::default()),
        Box::new(PolynomialMap::real(&[0.5, -1.0, 0.25, 1.0])),
    ];
    for g in &maps {
        match stein_expansion_residual(&dist, g.as_ref(), 1, 1_000_000, &mut rng) {
            Ok(c) => worst = worst.max(c.residual / c.diff_stderr),
            Err(e) => return err_check("gaussian stein", e),
        }
    }
    Check::new(
        "gaussian stein",
        worst <= 5.0,
        format!("max residual = {worst:.2} SE at 10⁶ draws"),
    )
}

fn cumulant_round_trip() -> Check {
    let mut worst: f64 = 0.0;
    for dist in [
        EntryDistribution::gaussian(),
        EntryDistribution::rademacher(),
        EntryDistribution::uniform(),
        EntryDistribution::two_point(0.3).unwrap(),
    ] {
        let m = dist.exact_moments();
        let k = cumulants_from_moments([m[0], m[1], m[2], m[3]]);
        worst = worst.max((k[3] - dist.kappa4()).abs());
        let back = moments_from_cumulants(k);
        for i in 0..4 {
            worst = worst.max((back[i] - m[i]).abs());
        }
    }
    Check::new(
        "cumulant round trip",
        worst <= 1e-12,
        format!("max gap = {worst:.3e}"),
    )
}

fn truncation_thresholds() -> Check {
    let cases = [
        (16, 16, 0.05, 256f64.powf(0.2)),
        (10_000, 100, 0.01, 10f64.powf(1.44)),
    ];
    let mut worst: f64 = 0.0;
    for (m, n, t, expected) in cases {
        match truncation_threshold(m, n, t) {
            Ok(spec) => worst = worst.max((spec.tau - expected).abs() / expected),
            Err(e) => return err_check("truncation threshold", e),
        }
    }
    Check::new(
        "truncation threshold",
        worst <= 1e-12,
        format!("max relative gap = {worst:.3e}"),
    )
}

fn stats_merge(seed: u64) -> Check {
    let mut rng = stream(seed, 4);
    let data: Vec<f64> = (0..3000).map(|_| rng.random_range(-5.0..5.0)).collect();
    let direct = RunningStats::from_slice(&data);
    let (a, rest) = data.split_at(700);
    let (b, c) = rest.split_at(1500);
    let (sa, sb, sc) = (
        RunningStats::from_slice(a),
        RunningStats::from_slice(b),
        RunningStats::from_slice(c),
    );
    let mut worst: f64 = 0.0;
    for merged in [sa.merge(&sb).merge(&sc), sa.merge(&sb.merge(&sc))] {
        for (x, y) in [
            (merged.mean(), direct.mean()),
            (merged.m2(), direct.m2()),
            (merged.m3(), direct.m3()),
            (merged.m4(), direct.m4()),
        ] {
            worst = worst.max((x - y).abs() / y.abs().max(1.0));
        }
    }
    Check::new(
        "stats merge",
        worst <= 1e-12,
        format!("max relative gap = {worst:.3e}"),
    )
}

fn ks_quantiles() -> Check {
    use statrs::distribution::{ContinuousCDF, Normal};
    let normal = Normal::standard();
    let q: Vec<f64> = (0..100)
        .map(|i| normal.inverse_cdf((i as f64 + 0.5) / 100.0))
        .collect();
    match ks_statistic(&q, normal_cdf) {
        Ok(d) => Check::new(
            "ks quantiles",
            (d - 0.005).abs() <= 1e-9,
            format!("D = {d:.12}"),
        ),
        Err(e) => err_check("ks quantiles", e),
    }
}

/// Runs the battery against `transform`, writing one line per check.
pub fn verify_battery_with(
    seed: u64,
    transform: &Transform,
    out: &mut dyn Write,
) -> io::Result<Vec<Check>> {
    let steps: Vec<Box<dyn Fn() -> Check + '_>> = vec![
        Box::new(|| branch_law(transform)),
        Box::new(|| quadratic_residual(transform)),
        Box::new(|| stieltjes_decay(transform)),
        Box::new(density_normalization),
        Box::new(expansion_bracket),
        Box::new(variance_quadrature),
        Box::new(trace_identity),
        Box::new(move || rademacher_trace(seed)),
        Box::new(move || resolvent_derivatives(seed)),
        Box::new(move || interlacing(seed)),
        Box::new(move || gaussian_stein(seed)),
        Box::new(cumulant_round_trip),
        Box::new(truncation_thresholds),
        Box::new(move || stats_merge(seed)),
        Box::new(ks_quantiles),
    ];
    let mut checks = Vec::with_capacity(steps.len());
    for step in steps {
        let c = step();
        writeln!(
            out,
            "{}  {:<24}{}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        )?;
        checks.push(c);
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    if failed.is_empty() {
        writeln!(out, "all {} checks passed", checks.len())?;
    } else {
        writeln!(out, "failed: {}", failed.join(", "))?;
    }
    Ok(checks)
}

/// The battery against the library transform; `true` iff every check passes.
pub fn verify_battery(seed: u64, out: &mut dyn Write) -> io::Result<bool> {
    let checks = verify_battery_with(seed, &semicircle_stieltjes, out)?;
    Ok(checks.iter().all(|c| c.passed))
}
