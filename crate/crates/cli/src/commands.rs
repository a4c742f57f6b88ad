//! One function per Monte Carlo / analytic verb, each producing a [`Report`].

use std::f64::consts::PI;

use covlab_core::montecarlo::{
    clt_reports, expansion_reports, green_diag_report, variance_scaling_report, GREEN_DIAG_MAX_N,
};
use covlab_core::{
    semicircle_density, semicircle_stieltjes, variance_functional, Complex64, EnsembleConfig,
    ExpansionReport, QuadratureSpec, RunOptions,
};

use crate::args::{Invocation, Verb};
use crate::report::{ConfigSummary, Field, Report, Row};
use crate::CliError;

/// `|f̂ − f| ≥ 3·|f̂ − f − first|` is required of the first correction.
pub const RESIDUAL_ORDER_FACTOR: f64 = 3.0;
/// Allowed growth of the residual from adding the `1/N` term, in SE.
pub const SECOND_ORDER_SLACK_SE: f64 = 3.0;
/// Ratio bound for `N²·Var m_N` and for the Green ladder.
pub const LADDER_RATIO_MAX: f64 = 4.0;
/// Bound on `green_diag_msq / (1/N + N/M)`.
pub const GREEN_RATIO_MAX: f64 = 10.0;
/// Quadrature order for the variance functional.
pub const QUAD_ORDER: usize = 200;
/// Relative agreement required between orders `q` and `2q`.
pub const QUAD_CONVERGENCE: f64 = 1e-8;

fn core_err(e: covlab_core::Error) -> CliError {
    CliError::Run(e.to_string())
}

fn run_options(inv: &Invocation) -> RunOptions {
    RunOptions::with_threads(inv.threads)
}

fn report(inv: &Invocation, key_name: &'static str, results: Vec<Row>) -> Report {
    Report {
        command: inv.verb.as_str().to_string(),
        config: ConfigSummary::of(&inv.config, inv.t),
        key_name,
        results,
        runtime_seconds: None,
    }
}

/// Runs every verb except `verify`.
pub fn execute(inv: &Invocation) -> Result<Report, CliError> {
    match inv.verb {
        Verb::Density => density(inv),
        Verb::Transform => transform(inv),
        Verb::Expansion => expansion(inv),
        Verb::Clt => clt(inv),
        Verb::VarianceQuad => variance_quad(inv),
        Verb::Scaling => scaling(inv),
        Verb::Verify => Err(CliError::Usage(
            "verify is run through the battery, not execute".into(),
        )),
    }
}

/// Ordering verdict: the first correction removes at least two thirds of
/// the raw residual and the second does not make things worse beyond noise.
pub fn expansion_verdict(r: &ExpansionReport) -> bool {
    let [r0, r1, r2] = r.residuals.map(|c| c.norm());
    r0 >= RESIDUAL_ORDER_FACTOR * r1 && r2 <= r1 + SECOND_ORDER_SLACK_SE * r.stderr()
}

fn expansion(inv: &Invocation) -> Result<Report, CliError> {
    let reports = expansion_reports(&inv.config, &run_options(inv)).map_err(core_err)?;
    let rows = reports
        .iter()
        .map(|r| {
            let mut row = Row::new(Field::Complex(r.z.to_complex()));
            row.predicted = r.terms.total.into();
            row.estimate = r.f_hat.into();
            row.stderr = r.stderr().into();
            row.residuals = r.residuals.iter().map(|&c| c.into()).collect();
            row.pass = expansion_verdict(r);
            row.extra = vec![
                ("leading", r.terms.leading.into()),
                ("first_order", r.terms.first_order.into()),
                ("second_order", r.terms.second_order.into()),
                ("stderr_re", r.stderr_re.into()),
                ("stderr_im", r.stderr_im.into()),
            ];
            row
        })
        .collect();
    Ok(report(inv, "z", rows))
}

/// Smoothed density `(1/π) Im f̂(E + iη)` against the expansion of `f_N`.
fn density(inv: &Invocation) -> Result<Report, CliError> {
    let reports = expansion_reports(&inv.config, &run_options(inv)).map_err(core_err)?;
    let rows = reports
        .iter()
        .map(|r| {
            let predicted = r.terms.total.im / PI;
            let estimate = r.f_hat.im / PI;
            let stderr = r.stderr_im / PI;
            let limit = r.terms.leading.im / PI;
            let mut row = Row::new(Field::Complex(r.z.to_complex()));
            row.predicted = predicted.into();
            row.estimate = estimate.into();
            row.stderr = stderr.into();
            row.residuals = vec![(estimate - limit).into(), (estimate - predicted).into()];
            // what the expansion leaves unexplained must not exceed its last term
            row.pass =
                (estimate - predicted).abs() <= 3.0 * stderr + r.terms.second_order.im.abs() / PI;
            row.extra = vec![
                ("smoothed_limit", limit.into()),
                ("semicircle_density", semicircle_density(r.z.re).into()),
            ];
            row
        })
        .collect();
    Ok(report(inv, "z", rows))
}

/// The closed form against an independent fixed-point solve of
/// `f = −1/(z + f)`.
fn transform(inv: &Invocation) -> Result<Report, CliError> {
    let rows = inv
        .config
        .z_list
        .iter()
        .map(|&z| {
            let f = semicircle_stieltjes(z).map_err(core_err)?;
            let zc = z.to_complex();
            let iterated = fixed_point_transform(zc);
            let quadratic = (f * f + zc * f + 1.0).norm();
            let gap = (f - iterated).norm();
            let mut row = Row::new(Field::Complex(zc));
            row.predicted = f.into();
            row.estimate = iterated.into();
            row.residuals = vec![quadratic.into(), gap.into()];
            row.pass = f.im > 0.0 && quadratic <= 1e-12 * (1.0 + zc.norm()) && gap <= 1e-10;
            Ok(row)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(report(inv, "z", rows))
}

/// Iterates `f ← −1/(z + f)` from `f = i`; contracts for every `Im z > 0`.
pub fn fixed_point_transform(z: Complex64) -> Complex64 {
    let mut f = Complex64::new(0.0, 1.0);
    for _ in 0..200_000 {
        let next = -(z + f).inv();
        if (next - f).norm() <= 1e-16 * next.norm().max(1e-300) {
            return next;
        }
        f = next;
    }
    f
}

fn clt(inv: &Invocation) -> Result<Report, CliError> {
    let quad = QuadratureSpec::new(QUAD_ORDER, 1e-8).map_err(core_err)?;
    let reports = clt_reports(&inv.config, &run_options(inv), quad).map_err(core_err)?;
    let rows = reports
        .iter()
        .map(|r| {
            let mut row = Row::new(Field::text(r.phi.clone()));
            row.predicted = r.predicted_variance().into();
            row.estimate = r.empirical_variance.into();
            row.stderr = r.variance_stderr.into();
            row.residuals = vec![(r.empirical_variance - r.predicted_variance()).into()];
            row.pass = r.passes();
            row.extra = vec![
                ("empirical_mean", r.empirical_mean.into()),
                ("mean_stderr", r.mean_stderr.into()),
                ("skewness", r.skewness.into()),
                ("skewness_stderr", r.skewness_stderr.into()),
                ("excess_kurtosis", r.excess_kurtosis.into()),
                ("kurtosis_stderr", r.kurtosis_stderr.into()),
                ("ks_statistic", r.ks_statistic.into()),
                ("ks_scaled", r.ks_scaled().into()),
                ("degenerate", Field::text(r.degenerate.to_string())),
            ];
            row
        })
        .collect();
    Ok(report(inv, "phi", rows))
}

/// The variance functional at orders `q` and `2q`.
fn variance_quad(inv: &Invocation) -> Result<Report, CliError> {
    let kappa4 = inv.config.dist.kappa4();
    let coarse = QuadratureSpec::new(QUAD_ORDER, 1e-8).map_err(core_err)?;
    let fine = QuadratureSpec::new(2 * QUAD_ORDER, 1e-8).map_err(core_err)?;
    let rows = inv
        .config
        .phi_list
        .iter()
        .map(|phi| {
            let a = variance_functional(phi, kappa4, coarse).map_err(core_err)?;
            let b = variance_functional(phi, kappa4, fine).map_err(core_err)?;
            let mut row = Row::new(Field::text(phi.name()));
            row.predicted = a.total.into();
            row.estimate = b.total.into();
            row.residuals = vec![(b.total - a.total).into()];
            row.pass = (b.total - a.total).abs() <= QUAD_CONVERGENCE * a.total.abs().max(1.0);
            row.extra = vec![
                ("double_integral", a.double_integral.into()),
                ("kappa_integral", a.kappa_integral.into()),
                ("kappa_term", a.kappa_term.into()),
            ];
            Ok(row)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(report(inv, "phi", rows))
}

/// Rungs `N/2, N, 2N` at the configured `M/N`.
pub fn ladder(cfg: &EnsembleConfig) -> Result<Vec<EnsembleConfig>, CliError> {
    if cfg.n < 4 || !cfg.n.is_multiple_of(2) || !cfg.m.is_multiple_of(cfg.n) {
        return Err(CliError::Usage(format!(
            "scaling needs even N >= 4 dividing M, got N = {}, M = {}",
            cfg.n, cfg.m
        )));
    }
    let ratio = cfg.m / cfg.n;
    Ok([cfg.n / 2, cfg.n, 2 * cfg.n]
        .iter()
        .map(|&n| EnsembleConfig {
            n,
            m: ratio * n,
            truncation: None,
            ..cfg.clone()
        })
        .collect())
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// Scaling ladders: `N²·Var m_N(z)` and the Green-diagonal
/// ratio over three rungs of fixed `N/M`.
fn scaling(inv: &Invocation) -> Result<Report, CliError> {
    let opts = run_options(inv);
    let rungs = ladder(&inv.config)?;
    let mut rows = Vec::new();
    for &z in &inv.config.z_list {
        let conc = variance_scaling_report(&rungs, z, &opts).map_err(core_err)?;
        let green: Vec<Option<f64>> = rungs
            .iter()
            .map(|cfg| {
                if cfg.n > GREEN_DIAG_MAX_N {
                    return Ok(None);
                }
                green_diag_report(cfg, z, &opts).map(|r| r.green_ratio())
            })
            .collect::<Result<_, _>>()
            .map_err(core_err)?;
        let scaled: Vec<f64> = conc.iter().map(|c| c.scaled_variance()).collect();
        let ratios: Vec<f64> = green.iter().flatten().copied().collect();
        let pass = spread(&scaled) <= LADDER_RATIO_MAX
            && ratios.iter().all(|&r| r <= GREEN_RATIO_MAX)
            && (ratios.len() < 2 || spread(&ratios) <= LADDER_RATIO_MAX);
        for (i, (c, g)) in conc.iter().zip(&green).enumerate() {
            let mut row = Row::new(Field::Complex(z.to_complex()));
            row.estimate = c.scaled_variance().into();
            row.pass = pass;
            row.extra = vec![
                ("rung", Field::Int(i as u64)),
                ("n", Field::Int(c.n as u64)),
                ("m", Field::Int(c.m as u64)),
                ("var_re", c.var_re.into()),
                ("var_im", c.var_im.into()),
                ("var_mn", c.var_mn.into()),
                ("green_ratio", (*g).into()),
                ("green_normalizer", c.green_normalizer().into()),
            ];
            rows.push(row);
        }
    }
    Ok(report(inv, "z", rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use covlab_core::{ComplexPoint, EntryDistribution};

    #[test]
    fn fixed_point_matches_closed_form() {
        for z in [
            ComplexPoint::imaginary(2.0),
            ComplexPoint::new(1.0, 2.0),
            ComplexPoint::new(-1.9, 0.05),
        ] {
            let f = semicircle_stieltjes(z).unwrap();
            assert!((fixed_point_transform(z.to_complex()) - f).norm() < 1e-12);
        }
    }

    #[test]
    fn ladder_keeps_ratio() {
        let cfg = EnsembleConfig::new(64, 4096, EntryDistribution::gaussian());
        let rungs = ladder(&cfg).unwrap();
        let dims: Vec<_> = rungs.iter().map(|c| (c.n, c.m)).collect();
        assert_eq!(dims, vec![(32, 2048), (64, 4096), (128, 8192)]);
        assert!(ladder(&EnsembleConfig::new(6, 100, EntryDistribution::gaussian())).is_err());
    }
}
