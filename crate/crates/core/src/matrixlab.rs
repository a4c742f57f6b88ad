//! Matrix construction, spectra and resolvents.
//!
//! `Y` is always the scaled data matrix `(MN)^{-1/4} X`, so that
//! `H = YᵀY − √(M/N)·I`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::analytic::{ComplexPoint, TestFunction};
use crate::entries::{truncate_recenter_in_place, EntryDistribution, TruncationSpec};
use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// The `M × N` scaled data matrix `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    y: DMatrix<f64>,
}

impl DataMatrix {
    /// Wraps an already scaled `Y`.
    pub fn from_scaled(y: DMatrix<f64>) -> Result<Self> {
        let (m, n) = y.shape();
        if n < 1 || m < n {
            return Err(Error::InvalidDimensions(format!(
                "data matrix needs M >= N >= 1, got {m} x {n}"
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "data matrix has non-finite entries".into(),
            ));
        }
        Ok(Self { y })
    }

    /// Scales raw entries `X` by `(MN)^{-1/4}`.
    pub fn from_raw(x: DMatrix<f64>) -> Result<Self> {
        let (m, n) = x.shape();
        let scale = (m as f64 * n as f64).powf(-0.25);
        Self::from_scaled(x * scale)
    }

    /// Draws `X` with i.i.d. entries, optionally truncates and recentres the
    /// whole batch, and scales it.
    pub fn sample<R: Rng + ?Sized>(
        m: usize,
        n: usize,
        dist: &EntryDistribution,
        truncation: Option<&TruncationSpec>,
        rng: &mut R,
    ) -> Result<Self> {
        let mut raw = vec![0.0; m * n];
        dist.sample_into(rng, &mut raw);
        if let Some(spec) = truncation {
            truncate_recenter_in_place(&mut raw, spec.tau);
        }
        Self::from_raw(DMatrix::from_vec(m, n, raw))
    }

    pub fn rows(&self) -> usize {
        self.y.nrows()
    }

    pub fn cols(&self) -> usize {
        self.y.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// `√(M/N)`.
    pub fn shift(&self) -> f64 {
        (self.rows() as f64 / self.cols() as f64).sqrt()
    }

    fn with_entry(&self, j: usize, k: usize, delta: f64) -> Self {
        let mut y = self.y.clone();
        y[(j, k)] += delta;
        Self { y }
    }

    fn without_column(&self, k: usize) -> DMatrix<f64> {
        self.y.clone().remove_column(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelTag {
    SampleCov,
    Wigner,
    Reduced,
}

/// Ascending eigenvalues of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSample {
    pub eigenvalues: Vec<f64>,
    pub model_tag: ModelTag,
}

impl SpectralSample {
    pub fn new(mut eigenvalues: Vec<f64>, model_tag: ModelTag) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        Self {
            eigenvalues,
            model_tag,
        }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

/// `H = YᵀY − √(M/N)·I`, symmetrized after accumulation.
pub fn build_h(y: &DataMatrix) -> DMatrix<f64> {
    gram_shifted(y.matrix(), y.shift())
}

fn gram_shifted(y: &DMatrix<f64>, shift: f64) -> DMatrix<f64> {
    let yt = y.transpose();
    let gram = &yt * y;
    let n = gram.nrows();
    DMatrix::from_fn(n, n, |a, b| {
        let v = 0.5 * (gram[(a, b)] + gram[(b, a)]);
        if a == b {
            v - shift
        } else {
            v
        }
    })
}

/// `H` for Gaussian entries drawn through the Bartlett decomposition of the
/// Wishart matrix `XᵀX = AAᵀ`: `A` lower triangular with `A_ii² ~ χ²_{M−i}`
/// and standard normal entries below the diagonal. Same law as
/// `build_h(DataMatrix::sample(..))` at `O(N²)` draws instead of `O(MN)`.
pub fn wishart_h<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    if n < 1 || m < n {
        return Err(Error::InvalidDimensions(format!(
            "Wishart sampling needs M >= N >= 1, got M = {m}, N = {n}"
        )));
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let chi =
            ChiSquared::new((m - i) as f64).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let w = &a * a.transpose();
    let mf = m as f64;
    let scale = (mf * n as f64).sqrt().recip();
    Ok(DMatrix::from_fn(n, n, |r, c| {
        let v = 0.5 * (w[(r, c)] + w[(c, r)]);
        if r == c {
            (v - mf) * scale
        } else {
            v * scale
        }
    }))
}

/// Wigner comparison matrix: off-diagonal entries from `dist` with variance
/// `1/N`, Gaussian diagonal with variance `(ω₄ − 1)/N`.
pub fn build_wigner<R: Rng + ?Sized>(
    n: usize,
    dist: &EntryDistribution,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if n < 1 {
        return Err(Error::InvalidDimensions(
            "Wigner matrix needs N >= 1".into(),
        ));
    }
    let scale = (n as f64).sqrt().recip();
    let diag_scale = (dist.moment(4) - 1.0).max(0.0).sqrt() * scale;
    let mut w = DMatrix::<f64>::zeros(n, n);
    let upper = dist.sample(rng, n * (n - 1) / 2);
    let mut it = upper.into_iter();
    for r in 0..n {
        for c in (r + 1)..n {
            let v = it.next().expect("sized above") * scale;
            w[(r, c)] = v;
            w[(c, r)] = v;
        }
    }
    for r in 0..n {
        let g: f64 = rng.sample(StandardNormal);
        w[(r, r)] = g * diag_scale;
    }
    Ok(w)
}

pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for r in 0..n {
        for c in (r + 1)..n {
            worst = worst.max((a[(r, c)] - a[(c, r)]).abs());
        }
    }
    worst
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidDimensions(format!(
            "expected a square matrix, got {} x {}",
            a.nrows(),
            a.ncols()
        )));
    }
    let scale = a.amax().max(1.0);
    let asym = max_asymmetry(a);
    if asym > 1e-10 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// All eigenvalues of a symmetric matrix, ascending.
pub fn eigenvalues_sym(a: &DMatrix<f64>, tag: ModelTag) -> Result<SpectralSample> {
    check_symmetric(a)?;
    let values = a.clone().symmetric_eigenvalues();
    Ok(SpectralSample::new(values.iter().copied().collect(), tag))
}

/// Eigenvalues (ascending) with the matching orthonormal eigenvectors as
/// columns.
pub fn eigen_decomposition_sym(
    a: &DMatrix<f64>,
    tag: ModelTag,
) -> Result<(SpectralSample, DMatrix<f64>)> {
    check_symmetric(a)?;
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    Ok((
        SpectralSample {
            eigenvalues: values,
            model_tag: tag,
        },
        vectors,
    ))
}

/// `(1/N) Σ 1/(λᵢ − z)`.
pub fn empirical_stieltjes(s: &SpectralSample, z: ComplexPoint) -> Result<Complex64> {
    let z = z.upper()?.to_complex();
    if s.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: Complex64 = s
        .eigenvalues
        .iter()
        .map(|&l| (Complex64::new(l, 0.0) - z).inv())
        .sum();
    Ok(sum / s.len() as f64)
}

/// `Σ φ(λᵢ)`.
pub fn linear_statistic(s: &SpectralSample, phi: &TestFunction) -> f64 {
    s.eigenvalues.iter().map(|&l| phi.value(l)).sum()
}

/// Green function `G = (H − z)⁻¹` at one spectral point.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolvent {
    pub z: ComplexPoint,
    pub entries: CMatrix,
}

impl Resolvent {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.diagonal().iter().sum()
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        self.entries.diagonal().iter().copied().collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in (r + 1)..n {
                worst = worst.max((self.entries[(r, c)] - self.entries[(c, r)]).norm());
            }
        }
        worst
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |((H − z)G − I)_{ab}|`.
    pub fn residual(&self, h: &DMatrix<f64>) -> f64 {
        let n = self.dim();
        let shifted = shifted_complex(h, self.z.to_complex());
        let prod = shifted * &self.entries;
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((prod[(r, c)] - target).norm());
            }
        }
        worst
    }
}

fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|v| Complex64::new(v, 0.0))
}

fn shifted_complex(h: &DMatrix<f64>, z: Complex64) -> CMatrix {
    let mut a = to_complex(h);
    for i in 0..a.nrows() {
        a[(i, i)] -= z;
    }
    a
}

/// Solves `(H − z)G = I` column by column through one LU factorization.
pub fn resolvent(h: &DMatrix<f64>, z: ComplexPoint) -> Result<Resolvent> {
    let z = z.upper()?;
    if !h.is_square() {
        return Err(Error::InvalidDimensions(
            "resolvent needs a square matrix".into(),
        ));
    }
    let n = h.nrows();
    let lu = shifted_complex(h, z.to_complex()).lu();
    let entries = lu
        .solve(&CMatrix::identity(n, n))
        .expect("H - z is invertible for Im z > 0");
    Ok(Resolvent { z, entries })
}

/// Diagonal of `G(z)` from an eigendecomposition: `G_kk = Σᵢ v_{ki}²/(λᵢ − z)`.
pub fn green_diagonal(values: &[f64], vectors: &DMatrix<f64>, z: Complex64) -> Vec<Complex64> {
    let weights: Vec<Complex64> = values
        .iter()
        .map(|&l| (Complex64::new(l, 0.0) - z).inv())
        .collect();
    (0..vectors.nrows())
        .map(|k| {
            weights
                .iter()
                .enumerate()
                .map(|(i, w)| w * (vectors[(k, i)] * vectors[(k, i)]))
                .sum()
        })
        .collect()
}

/// Spectrum of the `M × M` companion `YYᵀ − √(M/N)`: the `N` eigenvalues of
/// `H` together with `−√(M/N)` repeated `M − N` times.
pub fn reduced_spectrum(h_spectrum: &SpectralSample, m: usize) -> SpectralSample {
    let n = h_spectrum.len();
    let shift = (m as f64 / n as f64).sqrt();
    let mut values = h_spectrum.eigenvalues.clone();
    values.extend(std::iter::repeat_n(-shift, m.saturating_sub(n)));
    SpectralSample::new(values, ModelTag::Reduced)
}

/// Diagonals of `G̃ = (YYᵀ − √(M/N) − z)⁻¹` and of `YGYᵀ`, built from the
/// eigenpairs `(λᵢ, vᵢ)` of `H`. With `uᵢ = Y vᵢ`:
/// `(YGYᵀ)_jj = Σᵢ u_{ji}²/(λᵢ − z)` and
/// `G̃_jj = Σᵢ u_{ji}²/((λᵢ + s)(λᵢ − z)) + (1 − Σᵢ u_{ji}²/(λᵢ + s))/(−s − z)`.
pub fn companion_diagonals(
    y: &DataMatrix,
    values: &[f64],
    vectors: &DMatrix<f64>,
    z: Complex64,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let shift = y.shift();
    let u = y.matrix() * vectors;
    let outside = (Complex64::new(-shift, 0.0) - z).inv();
    let res: Vec<Complex64> = values
        .iter()
        .map(|&l| (Complex64::new(l, 0.0) - z).inv())
        .collect();
    let mut reduced = Vec::with_capacity(y.rows());
    let mut ygy = Vec::with_capacity(y.rows());
    for j in 0..y.rows() {
        let mut g_red = Complex64::new(0.0, 0.0);
        let mut g_ygy = Complex64::new(0.0, 0.0);
        let mut mass = 0.0;
        for (i, &l) in values.iter().enumerate() {
            let u2 = u[(j, i)] * u[(j, i)];
            g_ygy += res[i] * u2;
            let sv = l + shift;
            if sv > 1e-300 {
                let w = u2 / sv;
                mass += w;
                g_red += res[i] * w;
            }
        }
        g_red += outside * (1.0 - mass);
        reduced.push(g_red);
        ygy.push(g_ygy);
    }
    (reduced, ygy)
}

/// Largest deviations between central finite differences in `Y_jk` and the
/// closed-form derivatives of `G`, `YG` and `G_kk (YGYᵀ)_jj`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeCheck {
    pub green: f64,
    pub y_green: f64,
    pub product: f64,
}

impl DerivativeCheck {
    pub fn max(&self) -> f64 {
        self.green.max(self.y_green).max(self.product)
    }
}

struct GreenBundle {
    g: CMatrix,
    yg: CMatrix,
    ygy: CMatrix,
}

fn green_bundle(y: &DataMatrix, z: ComplexPoint) -> Result<GreenBundle> {
    let g = resolvent(&build_h(y), z)?.entries;
    let yc = to_complex(y.matrix());
    let yg = &yc * &g;
    let ygy = &yg * yc.transpose();
    Ok(GreenBundle { g, yg, ygy })
}

pub fn resolvent_derivative_check(
    y: &DataMatrix,
    j: usize,
    k: usize,
    z: ComplexPoint,
    eps: f64,
) -> Result<DerivativeCheck> {
    let (m, n) = (y.rows(), y.cols());
    if j >= m || k >= n {
        return Err(Error::IndexOutOfRange(format!(
            "(j, k) = ({j}, {k}) outside {m} x {n}"
        )));
    }
    if !(1e-8..=1e-4).contains(&eps) {
        return Err(Error::InvalidParameter(format!(
            "step must lie in [1e-8, 1e-4], got {eps}"
        )));
    }
    let base = green_bundle(y, z)?;
    let plus = green_bundle(&y.with_entry(j, k, eps), z)?;
    let minus = green_bundle(&y.with_entry(j, k, -eps), z)?;
    let h2 = 2.0 * eps;
    let (g, yg, ygy) = (&base.g, &base.yg, &base.ygy);

    let mut green: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let fd = (plus.g[(a, b)] - minus.g[(a, b)]) / h2;
            let formula = -yg[(j, a)] * g[(b, k)] - yg[(j, b)] * g[(a, k)];
            green = green.max((fd - formula).norm());
        }
    }

    let mut y_green: f64 = 0.0;
    for a in 0..m {
        for b in 0..n {
            let fd = (plus.yg[(a, b)] - minus.yg[(a, b)]) / h2;
            let delta = if a == j {
                g[(b, k)]
            } else {
                Complex64::new(0.0, 0.0)
            };
            let formula = delta - g[(b, k)] * ygy[(j, a)] - yg[(j, b)] * yg[(a, k)];
            y_green = y_green.max((fd - formula).norm());
        }
    }

    let product = |bundle: &GreenBundle| bundle.g[(k, k)] * bundle.ygy[(j, j)];
    let fd = (product(&plus) - product(&minus)) / h2;
    let formula = g[(k, k)] * yg[(j, k)] * 2.0 - g[(k, k)] * yg[(j, k)] * ygy[(j, j)] * 4.0;
    let product = (fd - formula).norm();

    Ok(DerivativeCheck {
        green,
        y_green,
        product,
    })
}

/// Largest violation of `λ₁ ≤ μ₁ ≤ λ₂ ≤ … ≤ μ_{N−1} ≤ λ_N` between `H` and
/// the matrix built with column `drop_col` of `Y` removed (zero when the
/// interlacing holds exactly).
pub fn interlacing_violation(y: &DataMatrix, drop_col: usize) -> Result<f64> {
    let n = y.cols();
    if n < 2 {
        return Err(Error::InvalidDimensions("interlacing needs N >= 2".into()));
    }
    if drop_col >= n {
        return Err(Error::IndexOutOfRange(format!(
            "column {drop_col} outside 0..{n}"
        )));
    }
    let full = eigenvalues_sym(&build_h(y), ModelTag::SampleCov)?.eigenvalues;
    let minor = gram_shifted(&y.without_column(drop_col), y.shift());
    let sub = eigenvalues_sym(&minor, ModelTag::SampleCov)?.eigenvalues;
    let mut worst: f64 = 0.0;
    for (i, &mu) in sub.iter().enumerate() {
        worst = worst.max(full[i] - mu).max(mu - full[i + 1]);
    }
    Ok(worst)
}

pub fn interlacing_check(y: &DataMatrix, drop_col: usize, tol: f64) -> Result<bool> {
    Ok(interlacing_violation(y, drop_col)? <= tol)
}
