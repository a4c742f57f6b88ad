//! Numerical laboratory for the renormalized sample covariance matrix
//! `H = XᵀX/√(MN) − √(M/N)·I` in the regime `N/M → 0`.
//!
//! The crate is organised bottom-up:
//!
//! * [`analytic`]: semicircle and Marčenko–Pastur densities, the semicircle
//!   Stieltjes transform, the two-term expansion of `E m_N(z)` and the
//!   quadrature of the limiting variance of linear eigenvalue statistics.
//! * [`entries`]: standardized entry laws, their exact moments and cumulants,
//!   truncation and the generalized Stein expansion check.
//! * [`matrixlab`]: construction of `H`, eigenvalues, resolvents and the
//!   finite-difference and interlacing identities.
//! * [`stats`]: mergeable streaming moments and the Kolmogorov–Smirnov
//!   statistic.
//! * [`montecarlo`]: the replica engine and the statistical reports built on
//!   top of it.

pub mod analytic;
pub mod entries;
mod error;
pub mod matrixlab;
pub mod montecarlo;
pub mod rng;
pub mod stats;

pub use analytic::{
    expansion_prediction, mp_density, self_consistency_residual, semicircle_density,
    semicircle_stieltjes, variance_functional, ComplexPoint, ExpansionTerms, QuadratureSpec,
    TestFunction, VarianceBreakdown,
};
pub use entries::{EntryDistribution, TruncationSpec};
pub use error::{Error, Result};
pub use matrixlab::{DataMatrix, ModelTag, Resolvent, SpectralSample};
pub use montecarlo::{
    ConcentrationReport, EnsembleConfig, ExpansionReport, FluctuationReport, RunOptions,
    SamplerChoice,
};
pub use stats::RunningStats;

pub use num_complex::Complex64;
