//! Replica engine and the statistical reports computed from it.
//!
//! Replica `r` of an ensemble draws from stream `r` of the family keyed by the
//! ensemble seed. Replicas are simulated in fixed-size chunks on a worker
//! pool and handed to accumulators strictly in replica order, so every report
//! is a deterministic function of the configuration alone.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analytic::{
    expansion_prediction, variance_functional, ComplexPoint, ExpansionTerms, QuadratureSpec,
    TestFunction, VarianceBreakdown,
};
use crate::entries::{DistKind, EntryDistribution, TruncationSpec};
use crate::matrixlab::{
    build_h, companion_diagonals, eigen_decomposition_sym, eigenvalues_sym, empirical_stieltjes,
    green_diagonal, linear_statistic, wishart_h, DataMatrix, ModelTag, SpectralSample,
};
use crate::rng::stream;
use crate::stats::{ks_statistic, normal_cdf, RunningStats};
use crate::{Error, Result};

/// How Gaussian ensembles are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerChoice {
    /// Bartlett (Wishart) sampling for untruncated Gaussian entries, direct
    /// sampling of `X` otherwise.
    #[default]
    Auto,
    /// Always sample the full `M × N` matrix `X`.
    Direct,
}

/// Default spectral points, kept away from the edges `±2`.
pub const DEFAULT_Z: [ComplexPoint; 3] = [
    ComplexPoint::imaginary(2.0),
    ComplexPoint::new(1.0, 2.0),
    ComplexPoint::imaginary(1.0),
];

/// One Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n: usize,
    pub m: usize,
    pub dist: EntryDistribution,
    pub replicas: usize,
    pub seed: u64,
    pub truncation: Option<TruncationSpec>,
    pub z_list: Vec<ComplexPoint>,
    pub phi_list: Vec<TestFunction>,
    pub sampler: SamplerChoice,
}

impl EnsembleConfig {
    pub fn new(n: usize, m: usize, dist: EntryDistribution) -> Self {
        Self {
            n,
            m,
            dist,
            replicas: 2000,
            seed: 42,
            truncation: None,
            z_list: DEFAULT_Z.to_vec(),
            phi_list: vec![TestFunction::monomial(2)],
            sampler: SamplerChoice::Auto,
        }
    }

    pub fn with_replicas(mut self, replicas: usize) -> Self {
        self.replicas = replicas;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_z(mut self, z_list: Vec<ComplexPoint>) -> Self {
        self.z_list = z_list;
        self
    }

    pub fn with_phi(mut self, phi_list: Vec<TestFunction>) -> Self {
        self.phi_list = phi_list;
        self
    }

    pub fn with_sampler(mut self, sampler: SamplerChoice) -> Self {
        self.sampler = sampler;
        self
    }

    /// Enables truncate-and-recenter at `τ = (MN)^{1/4 − t}`.
    pub fn with_truncation(mut self, t: f64) -> Result<Self> {
        self.truncation = Some(TruncationSpec::new(self.m, self.n, t)?);
        Ok(self)
    }

    /// `y = N/M`.
    pub fn aspect_ratio(&self) -> f64 {
        self.n as f64 / self.m as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.m < self.n {
            return Err(Error::InvalidDimensions(format!(
                "ensemble needs M >= N >= 2, got N = {}, M = {}",
                self.n, self.m
            )));
        }
        if self.replicas < 1 {
            return Err(Error::InvalidParameter(
                "replicas must be at least 1".into(),
            ));
        }
        for z in &self.z_list {
            z.upper()?;
        }
        Ok(())
    }

    fn uses_wishart(&self, needs_data: bool) -> bool {
        self.sampler == SamplerChoice::Auto
            && !needs_data
            && self.truncation.is_none()
            && self.dist.kind() == DistKind::Gaussian
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 0 picks the number of available cores.
    pub threads: usize,
    /// Ceiling in bytes for [`collect_ensemble`], checked as `8·N²·replicas`.
    pub memory_budget: usize,
    /// Replicas simulated per parallel batch.
    pub chunk: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            threads: 0,
            memory_budget: 1 << 30,
            chunk: 256,
        }
    }
}

impl RunOptions {
    pub fn with_threads(threads: usize) -> Self {
        Self {
            threads,
            ..Self::default()
        }
    }
}

/// Per-replica quantities beyond the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Observables {
    /// `G_kk(z)` for every `z` of the configuration.
    pub green_diagonals: bool,
    /// `G̃_jj(z)` and `(YGYᵀ)_jj(z)`; forces direct sampling.
    pub companion: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaOutput {
    pub index: usize,
    pub spectrum: SpectralSample,
    /// One vector of `G_kk` per configured `z` (empty unless requested).
    pub green_diagonals: Vec<Vec<Complex64>>,
    /// One `(G̃_jj, (YGYᵀ)_jj)` pair of vectors per configured `z`.
    pub companion: Vec<(Vec<Complex64>, Vec<Complex64>)>,
}

fn simulate_replica(cfg: &EnsembleConfig, index: usize, obs: Observables) -> Result<ReplicaOutput> {
    let mut rng = stream(cfg.seed, index as u64);
    let (h, data) = if cfg.uses_wishart(obs.companion) {
        (wishart_h(cfg.m, cfg.n, &mut rng)?, None)
    } else {
        let y = DataMatrix::sample(cfg.m, cfg.n, &cfg.dist, cfg.truncation.as_ref(), &mut rng)?;
        (build_h(&y), Some(y))
    };
    if !(obs.green_diagonals || obs.companion) {
        return Ok(ReplicaOutput {
            index,
            spectrum: eigenvalues_sym(&h, ModelTag::SampleCov)?,
            green_diagonals: Vec::new(),
            companion: Vec::new(),
        });
    }
    let (spectrum, vectors) = eigen_decomposition_sym(&h, ModelTag::SampleCov)?;
    let green_diagonals = if obs.green_diagonals {
        cfg.z_list
            .iter()
            .map(|z| green_diagonal(&spectrum.eigenvalues, &vectors, z.to_complex()))
            .collect()
    } else {
        Vec::new()
    };
    let companion = match (&data, obs.companion) {
        (Some(y), true) => cfg
            .z_list
            .iter()
            .map(|z| companion_diagonals(y, &spectrum.eigenvalues, &vectors, z.to_complex()))
            .collect(),
        _ => Vec::new(),
    };
    Ok(ReplicaOutput {
        index,
        spectrum,
        green_diagonals,
        companion,
    })
}

fn build_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))
}

/// Streams every replica of `cfg` to `visit` in replica order.
pub fn run_ensemble(
    cfg: &EnsembleConfig,
    opts: &RunOptions,
    obs: Observables,
    mut visit: impl FnMut(ReplicaOutput),
) -> Result<()> {
    cfg.validate()?;
    let pool = build_pool(opts.threads)?;
    let chunk = opts.chunk.max(1);
    let mut start = 0;
    while start < cfg.replicas {
        let end = (start + chunk).min(cfg.replicas);
        let batch = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|r| simulate_replica(cfg, r, obs))
                .collect::<Result<Vec<_>>>()
        })?;
        batch.into_iter().for_each(&mut visit);
        start = end;
    }
    Ok(())
}

/// Materializes all spectra, refusing when `8·N²·replicas` exceeds the
/// memory budget.
pub fn collect_ensemble(cfg: &EnsembleConfig, opts: &RunOptions) -> Result<Vec<SpectralSample>> {
    let required = cfg
        .n
        .saturating_mul(cfg.n)
        .saturating_mul(cfg.replicas)
        .saturating_mul(std::mem::size_of::<f64>());
    if required > opts.memory_budget {
        return Err(Error::MemoryBudget {
            required,
            budget: opts.memory_budget,
        });
    }
    let mut out = Vec::with_capacity(cfg.replicas);
    run_ensemble(cfg, opts, Observables::default(), |r| out.push(r.spectrum))?;
    Ok(out)
}

/// Mean and spread of a complex observable, tracked per component.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComplexStats {
    pub re: RunningStats,
    pub im: RunningStats,
}

impl ComplexStats {
    pub fn push(&mut self, v: Complex64) {
        self.re.push(v.re);
        self.im.push(v.im);
    }

    pub fn mean(&self) -> Complex64 {
        Complex64::new(self.re.mean(), self.im.mean())
    }

    /// `√(SE_re² + SE_im²)`.
    pub fn stderr(&self) -> f64 {
        self.re.stderr_mean().hypot(self.im.stderr_mean())
    }

    /// `Var(Re) + Var(Im)`.
    pub fn variance(&self) -> f64 {
        self.re.variance() + self.im.variance()
    }
}

/// Monte Carlo estimate of `f_N(z) = E m_N(z)` against its expansion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionReport {
    pub z: ComplexPoint,
    pub n: usize,
    pub m: usize,
    pub kappa4: f64,
    pub replicas: usize,
    pub f_hat: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub terms: ExpansionTerms,
    /// `f̂ − f`, `f̂ − f − first`, `f̂ − f − first − second`.
    pub residuals: [Complex64; 3],
}

impl ExpansionReport {
    /// Joint standard error `√(SE_re² + SE_im²)` of `f̂`.
    pub fn stderr(&self) -> f64 {
        self.stderr_re.hypot(self.stderr_im)
    }

    /// `f̂ − f − second_order`: the deviation carried by the `√(N/M)` term.
    pub fn first_order_residual(&self) -> Complex64 {
        self.f_hat - self.terms.leading - self.terms.second_order
    }
}

/// Expansion reports for every `z` of the configuration from one ensemble.
pub fn expansion_reports(cfg: &EnsembleConfig, opts: &RunOptions) -> Result<Vec<ExpansionReport>> {
    cfg.validate()?;
    let kappa4 = cfg.dist.kappa4();
    let terms = cfg
        .z_list
        .iter()
        .map(|&z| expansion_prediction(z, cfg.n, cfg.m, kappa4))
        .collect::<Result<Vec<_>>>()?;
    let mut acc = vec![ComplexStats::default(); cfg.z_list.len()];
    let mut failure = None;
    run_ensemble(cfg, opts, Observables::default(), |r| {
        for (a, &z) in acc.iter_mut().zip(&cfg.z_list) {
            match empirical_stieltjes(&r.spectrum, z) {
                Ok(m) => a.push(m),
                Err(e) => failure = Some(e),
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(cfg
        .z_list
        .iter()
        .zip(terms)
        .zip(acc)
        .map(|((&z, terms), a)| {
            let f_hat = a.mean();
            ExpansionReport {
                z,
                n: cfg.n,
                m: cfg.m,
                kappa4,
                replicas: cfg.replicas,
                f_hat,
                stderr_re: a.re.stderr_mean(),
                stderr_im: a.im.stderr_mean(),
                terms,
                residuals: [
                    f_hat - terms.leading,
                    f_hat - terms.leading - terms.first_order,
                    f_hat - terms.total,
                ],
            }
        })
        .collect())
}

pub fn expansion_report(
    cfg: &EnsembleConfig,
    z: ComplexPoint,
    opts: &RunOptions,
) -> Result<ExpansionReport> {
    let cfg = cfg.clone().with_z(vec![z]);
    Ok(expansion_reports(&cfg, opts)?.remove(0))
}

/// Paired comparison of two ensembles that differ only in `κ₄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaDifference {
    pub observed: Complex64,
    /// `(1/N)·f·(κ₄ᵃ − κ₄ᵇ)·f²/(1 − f²)`.
    pub predicted: Complex64,
    pub joint_stderr: f64,
}

impl KappaDifference {
    pub fn between(a: &ExpansionReport, b: &ExpansionReport) -> Self {
        Self {
            observed: a.f_hat - b.f_hat,
            predicted: a.terms.second_order - b.terms.second_order,
            joint_stderr: a.stderr().hypot(b.stderr()),
        }
    }

    pub fn deviation(&self) -> f64 {
        (self.observed - self.predicted).norm()
    }
}

/// Fluctuations of one linear eigenvalue statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationReport {
    pub phi: String,
    pub replicas: usize,
    pub predicted: VarianceBreakdown,
    pub empirical_mean: f64,
    pub mean_stderr: f64,
    /// Unbiased (`n/(n − 1)`) variance of `Σφ(λᵢ)` across replicas.
    pub empirical_variance: f64,
    /// Delta-method standard error of `empirical_variance`.
    pub variance_stderr: f64,
    pub skewness: f64,
    pub skewness_stderr: f64,
    pub excess_kurtosis: f64,
    pub kurtosis_stderr: f64,
    /// KS distance of the standardized statistic from `N(0, 1)`; NaN when
    /// degenerate.
    pub ks_statistic: f64,
    /// The statistic does not fluctuate (numerically constant).
    pub degenerate: bool,
}

/// Variance band used by [`FluctuationReport::passes`].
pub const CLT_VARIANCE_BAND: f64 = 0.15;
/// Ceiling on `√n·D` used by [`FluctuationReport::passes`].
pub const CLT_KS_SCALED_MAX: f64 = 1.95;

impl FluctuationReport {
    pub fn predicted_variance(&self) -> f64 {
        self.predicted.total
    }

    pub fn ks_scaled(&self) -> f64 {
        self.ks_statistic * (self.replicas as f64).sqrt()
    }

    /// `|V̂ − V| ≤ max(5·SE, 15%·V)` and `√n·D ≤ 1.95`; a degenerate
    /// statistic passes only if the predicted variance vanishes.
    pub fn passes(&self) -> bool {
        let pred = self.predicted_variance();
        if self.degenerate {
            return pred.abs() <= 1e-9;
        }
        let gap = (self.empirical_variance - pred).abs();
        gap <= (5.0 * self.variance_stderr).max(CLT_VARIANCE_BAND * pred.abs())
            && self.ks_scaled() <= CLT_KS_SCALED_MAX
    }
}

/// Minimum replica count for CLT reports.
pub const CLT_MIN_REPLICAS: usize = 500;

fn fluctuation_report(
    phi: &TestFunction,
    values: &[f64],
    kappa4: f64,
    quad: QuadratureSpec,
) -> Result<FluctuationReport> {
    let stats = RunningStats::from_slice(values);
    let n = values.len() as f64;
    let std = stats.std_dev();
    let degenerate = std.is_nan() || std <= 1e-9 * stats.mean().abs().max(1.0);
    let ks = if degenerate {
        f64::NAN
    } else {
        let standardized: Vec<f64> = values.iter().map(|v| (v - stats.mean()) / std).collect();
        ks_statistic(&standardized, normal_cdf)?
    };
    Ok(FluctuationReport {
        phi: phi.name().to_string(),
        replicas: values.len(),
        predicted: variance_functional(phi, kappa4, quad)?,
        empirical_mean: stats.mean(),
        mean_stderr: stats.stderr_mean(),
        empirical_variance: stats.variance(),
        variance_stderr: stats.stderr_variance(),
        skewness: stats.skewness(),
        skewness_stderr: (6.0 / n).sqrt(),
        excess_kurtosis: stats.excess_kurtosis(),
        kurtosis_stderr: (24.0 / n).sqrt(),
        ks_statistic: ks,
        degenerate,
    })
}

/// CLT reports for every test function of the configuration.
pub fn clt_reports(
    cfg: &EnsembleConfig,
    opts: &RunOptions,
    quad: QuadratureSpec,
) -> Result<Vec<FluctuationReport>> {
    if cfg.replicas < CLT_MIN_REPLICAS {
        return Err(Error::InvalidParameter(format!(
            "CLT reports need at least {CLT_MIN_REPLICAS} replicas, got {}",
            cfg.replicas
        )));
    }
    let mut values = vec![Vec::with_capacity(cfg.replicas); cfg.phi_list.len()];
    run_ensemble(cfg, opts, Observables::default(), |r| {
        for (v, phi) in values.iter_mut().zip(&cfg.phi_list) {
            v.push(linear_statistic(&r.spectrum, phi));
        }
    })?;
    cfg.phi_list
        .iter()
        .zip(&values)
        .map(|(phi, v)| fluctuation_report(phi, v, cfg.dist.kappa4(), quad))
        .collect()
}

pub fn clt_report(
    cfg: &EnsembleConfig,
    phi: &TestFunction,
    opts: &RunOptions,
    quad: QuadratureSpec,
) -> Result<FluctuationReport> {
    let cfg = cfg.clone().with_phi(vec![phi.clone()]);
    Ok(clt_reports(&cfg, opts, quad)?.remove(0))
}

/// Concentration of `m_N(z)` and of the resolvent diagonals at one rung.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationReport {
    pub z: ComplexPoint,
    pub n: usize,
    pub m: usize,
    pub replicas: usize,
    pub f_hat: Complex64,
    pub var_re: f64,
    pub var_im: f64,
    /// `Var(Re m_N) + Var(Im m_N)`.
    pub var_mn: f64,
    /// Mean of `|G_kk + 1/(z + f̂)|²` over `k` and replicas.
    pub green_diag_msq: Option<f64>,
    /// Mean of `|G̃_jj + 1/(√(M/N) + z + f̂)|²` over `j` and replicas.
    pub reduced_diag_msq: Option<f64>,
    /// Mean of `|(YGYᵀ)_jj − f̂/(√(M/N) + z + f̂)|²` over `j` and replicas.
    pub ygy_msq: Option<f64>,
}

impl ConcentrationReport {
    /// `N²·Var{m_N(z)}`.
    pub fn scaled_variance(&self) -> f64 {
        (self.n as f64).powi(2) * self.var_mn
    }

    /// `1/N + N/M`.
    pub fn green_normalizer(&self) -> f64 {
        1.0 / self.n as f64 + self.n as f64 / self.m as f64
    }

    pub fn green_ratio(&self) -> Option<f64> {
        self.green_diag_msq.map(|v| v / self.green_normalizer())
    }

    /// `(N/M)³ + N/M²`.
    pub fn reduced_normalizer(&self) -> f64 {
        let (n, m) = (self.n as f64, self.m as f64);
        (n / m).powi(3) + n / (m * m)
    }

    /// `(N/M)² + 1/M`.
    pub fn ygy_normalizer(&self) -> f64 {
        let (n, m) = (self.n as f64, self.m as f64);
        (n / m).powi(2) + 1.0 / m
    }
}

/// Streaming accumulator of `mean |w + c|²` for a centre `c` fixed only
/// after the run: keeps `Σ|w|²` and `Σw`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SquareDeviation {
    count: f64,
    sum: Complex64,
    sum_sq: f64,
}

impl SquareDeviation {
    pub fn push(&mut self, w: Complex64) {
        self.count += 1.0;
        self.sum += w;
        self.sum_sq += w.norm_sqr();
    }

    pub fn extend(&mut self, values: &[Complex64]) {
        values.iter().for_each(|&w| self.push(w));
    }

    /// `mean |w + c|²`.
    pub fn around(&self, c: Complex64) -> f64 {
        let mean = self.sum / self.count;
        (self.sum_sq / self.count + 2.0 * (mean * c.conj()).re + c.norm_sqr()).max(0.0)
    }
}

/// `mean |G_kk + 1/(z + f̂)|²` over a set of resolvent diagonals, with `f̂`
/// their overall mean.
pub fn green_diag_msq(diagonals: &[Vec<Complex64>], z: ComplexPoint) -> f64 {
    let mut acc = SquareDeviation::default();
    diagonals.iter().for_each(|d| acc.extend(d));
    let f_hat = acc.sum / acc.count;
    acc.around((z.to_complex() + f_hat).inv())
}

fn concentration_run(
    cfg: &EnsembleConfig,
    z: ComplexPoint,
    opts: &RunOptions,
    obs: Observables,
) -> Result<ConcentrationReport> {
    if cfg.replicas < 2 {
        return Err(Error::InvalidParameter(
            "variance needs at least two replicas".into(),
        ));
    }
    let cfg = cfg.clone().with_z(vec![z]);
    let mut mn = ComplexStats::default();
    let mut green = SquareDeviation::default();
    let mut reduced = SquareDeviation::default();
    let mut ygy = SquareDeviation::default();
    let mut failure = None;
    run_ensemble(&cfg, opts, obs, |r| {
        match empirical_stieltjes(&r.spectrum, z) {
            Ok(m) => mn.push(m),
            Err(e) => failure = Some(e),
        }
        if let Some(d) = r.green_diagonals.first() {
            green.extend(d);
        }
        if let Some((red, yy)) = r.companion.first() {
            reduced.extend(red);
            ygy.extend(yy);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let f_hat = mn.mean();
    let zc = z.to_complex();
    let shift = (cfg.m as f64 / cfg.n as f64).sqrt();
    let outer = zc + f_hat + shift;
    Ok(ConcentrationReport {
        z,
        n: cfg.n,
        m: cfg.m,
        replicas: cfg.replicas,
        f_hat,
        var_re: mn.re.variance(),
        var_im: mn.im.variance(),
        var_mn: mn.variance(),
        green_diag_msq: obs
            .green_diagonals
            .then(|| green.around((zc + f_hat).inv())),
        reduced_diag_msq: obs.companion.then(|| reduced.around(outer.inv())),
        ygy_msq: obs.companion.then(|| ygy.around(-f_hat / outer)),
    })
}

/// `N²·Var{m_N(z)}` along a ladder of at least three sizes sharing `N/M`.
pub fn variance_scaling_report(
    ladder: &[EnsembleConfig],
    z: ComplexPoint,
    opts: &RunOptions,
) -> Result<Vec<ConcentrationReport>> {
    if ladder.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "variance ladder needs at least three rungs, got {}",
            ladder.len()
        )));
    }
    let y0 = ladder[0].aspect_ratio();
    if ladder
        .iter()
        .any(|c| (c.aspect_ratio() - y0).abs() > 1e-12 * y0)
    {
        return Err(Error::InvalidParameter(
            "variance ladder rungs must share N/M".into(),
        ));
    }
    ladder
        .iter()
        .map(|cfg| concentration_run(cfg, z, opts, Observables::default()))
        .collect()
}

/// Largest resolvent dimension for which diagonals are materialized.
pub const GREEN_DIAG_MAX_N: usize = 256;

/// Concentration of the resolvent diagonal `G_kk` around `−1/(z + f̂)`.
pub fn green_diag_report(
    cfg: &EnsembleConfig,
    z: ComplexPoint,
    opts: &RunOptions,
) -> Result<ConcentrationReport> {
    if cfg.n > GREEN_DIAG_MAX_N {
        return Err(Error::InvalidDimensions(format!(
            "resolvent diagonals are materialized only for N <= {GREEN_DIAG_MAX_N}"
        )));
    }
    concentration_run(
        cfg,
        z,
        opts,
        Observables {
            green_diagonals: true,
            companion: false,
        },
    )
}

/// As [`green_diag_report`], adding the companion diagonals `G̃_jj` and
/// `(YGYᵀ)_jj`. Always samples `X` directly.
pub fn companion_diag_report(
    cfg: &EnsembleConfig,
    z: ComplexPoint,
    opts: &RunOptions,
) -> Result<ConcentrationReport> {
    if cfg.n > GREEN_DIAG_MAX_N {
        return Err(Error::InvalidDimensions(format!(
            "resolvent diagonals are materialized only for N <= {GREEN_DIAG_MAX_N}"
        )));
    }
    concentration_run(
        cfg,
        z,
        opts,
        Observables {
            green_diagonals: true,
            companion: true,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dist: EntryDistribution) -> EnsembleConfig {
        EnsembleConfig::new(4, 32, dist)
            .with_replicas(40)
            .with_seed(9)
    }

    #[test]
    fn config_validation() {
        let g = EntryDistribution::gaussian();
        assert!(EnsembleConfig::new(1, 4, g).validate().is_err());
        assert!(EnsembleConfig::new(8, 4, g).validate().is_err());
        assert!(EnsembleConfig::new(4, 8, g)
            .with_replicas(0)
            .validate()
            .is_err());
        assert!(EnsembleConfig::new(4, 8, g)
            .with_z(vec![ComplexPoint::new(0.0, -1.0)])
            .validate()
            .is_err());
        assert!(EnsembleConfig::new(4, 8, g).with_truncation(0.3).is_err());
        assert_eq!(EnsembleConfig::new(4, 8, g).aspect_ratio(), 0.5);
    }

    #[test]
    fn ensemble_is_independent_of_thread_count_and_chunking() {
        for dist in [EntryDistribution::gaussian(), EntryDistribution::uniform()] {
            let cfg = small(dist);
            let a = collect_ensemble(&cfg, &RunOptions::with_threads(1)).unwrap();
            let mut opts = RunOptions::with_threads(4);
            opts.chunk = 7;
            let b = collect_ensemble(&cfg, &opts).unwrap();
            assert_eq!(a, b);
            let bits = |s: &[SpectralSample]| -> Vec<u64> {
                s.iter()
                    .flat_map(|x| x.eigenvalues.iter().map(|v| v.to_bits()))
                    .collect()
            };
            assert_eq!(bits(&a), bits(&b));
        }
    }

    #[test]
    fn replicas_arrive_in_order() {
        let mut seen = Vec::new();
        let mut opts = RunOptions::with_threads(3);
        opts.chunk = 5;
        run_ensemble(
            &small(EntryDistribution::rademacher()),
            &opts,
            Observables::default(),
            |r| seen.push(r.index),
        )
        .unwrap();
        assert_eq!(seen, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn memory_budget_is_enforced() {
        let cfg = small(EntryDistribution::gaussian());
        let opts = RunOptions {
            memory_budget: 100,
            ..RunOptions::default()
        };
        assert!(matches!(
            collect_ensemble(&cfg, &opts),
            Err(Error::MemoryBudget {
                required: 5120,
                budget: 100
            })
        ));
    }

    #[test]
    fn rademacher_trace_is_identically_zero() {
        let cfg = EnsembleConfig::new(2, 4, EntryDistribution::rademacher()).with_replicas(4096);
        for s in collect_ensemble(&cfg, &RunOptions::default()).unwrap() {
            assert!(s.trace().abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_trace_variance_small_case() {
        for sampler in [SamplerChoice::Auto, SamplerChoice::Direct] {
            let cfg = EnsembleConfig::new(2, 4, EntryDistribution::gaussian())
                .with_replicas(4096)
                .with_sampler(sampler);
            let traces: Vec<f64> = collect_ensemble(&cfg, &RunOptions::default())
                .unwrap()
                .iter()
                .map(SpectralSample::trace)
                .collect();
            let var = RunningStats::from_slice(&traces).variance();
            assert!((var - 2.0).abs() <= 0.3, "{sampler:?}: {var}");
        }
    }

    #[test]
    fn green_diag_zero_matrix_fixture() {
        let z = ComplexPoint::new(0.3, 1.7);
        let zc = z.to_complex();
        let diag = vec![vec![-zc.inv(); 5]; 3];
        let expected = (-zc.inv() + (zc - zc.inv()).inv()).norm_sqr();
        assert!((green_diag_msq(&diag, z) - expected).abs() < 1e-14);
    }

    #[test]
    fn square_deviation_matches_direct_mean() {
        let vals = [
            Complex64::new(0.1, 0.2),
            Complex64::new(-0.3, 0.5),
            Complex64::new(0.7, -0.1),
        ];
        let mut acc = SquareDeviation::default();
        acc.extend(&vals);
        let c = Complex64::new(0.2, -0.4);
        let direct = vals.iter().map(|v| (v + c).norm_sqr()).sum::<f64>() / 3.0;
        assert!((acc.around(c) - direct).abs() < 1e-15);
    }

    #[test]
    fn concentration_requires_two_replicas() {
        let cfg = small(EntryDistribution::gaussian()).with_replicas(1);
        assert!(
            green_diag_report(&cfg, ComplexPoint::imaginary(2.0), &RunOptions::default()).is_err()
        );
    }

    #[test]
    fn ladder_requires_three_rungs_with_common_ratio() {
        let g = EntryDistribution::gaussian();
        let z = ComplexPoint::imaginary(2.0);
        let opts = RunOptions::default();
        let two = [EnsembleConfig::new(4, 16, g), EnsembleConfig::new(8, 32, g)];
        assert!(variance_scaling_report(&two, z, &opts).is_err());
        let mixed = [
            EnsembleConfig::new(4, 16, g),
            EnsembleConfig::new(8, 32, g),
            EnsembleConfig::new(16, 32, g),
        ];
        assert!(variance_scaling_report(&mixed, z, &opts).is_err());
    }

    #[test]
    fn clt_requires_enough_replicas() {
        let cfg = small(EntryDistribution::gaussian());
        assert!(clt_reports(&cfg, &RunOptions::default(), QuadratureSpec::default()).is_err());
    }

    #[test]
    fn constant_statistic_is_flagged_degenerate() {
        let cfg = EnsembleConfig::new(4, 16, EntryDistribution::gaussian())
            .with_replicas(CLT_MIN_REPLICAS)
            .with_phi(vec![TestFunction::monomial(0)]);
        let r = clt_reports(&cfg, &RunOptions::default(), QuadratureSpec::default())
            .unwrap()
            .remove(0);
        assert!(r.degenerate);
        assert_eq!(r.empirical_variance, 0.0);
        assert!(r.ks_statistic.is_nan());
        assert!(r.passes());
    }
}
