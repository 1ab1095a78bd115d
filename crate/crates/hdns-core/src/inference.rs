//! OLS estimation and two bootstrap-calibrated hypothesis tests for
//! H₀: β = β₀ in time-series regression with non-stationary errors.
//!
//! Both tests reduce inference on β̂ − β₀ to the multiplier bootstrap applied
//! to the score rows `ẑ_i = (XᵀX/n)^{-1} x_i ε̂_i`, whose block-sum draws Ĝ
//! mimic the law of √n(β̂ − β₀) under the null:
//!
//! * **Combined test** — T = max{ |β̂−β₀|_∞·√n/√(2·log d),
//!   |β̂−β₀|₂·√(n/d) }, sensitive to both sparse strong deviations (L∞ arm)
//!   and dense weak ones (L² arm). Bootstrap analogue per draw:
//!   T^B = max{ |Ĝ|_∞/√(2·log d), |Ĝ|₂/√d }.
//! * **Soft-threshold test** — T = √n·|δ_λ(β̂) − β₀|_∞ with the
//!   coordinate-wise soft threshold δ_λ; λ_j = σ̂_j·√(2·log n / n) where σ̂_j
//!   estimates sd(β̂_j) from an independent batch of bootstrap draws. The
//!   bootstrap analogue thresholds the shifted null β₀ + Ĝ/√n the same way.
//!
//! Critical values are upper empirical quantiles of the sorted draws, and
//! p-values use the add-one convention p = (1 + #{T^B ≥ T})/(B + 1), which
//! keeps them strictly positive and level-valid at finite B.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::bootstrap::{self, BootstrapError};
use crate::linalg;
use crate::models::{ModelError, TimeSeriesMatrix};
use crate::rng::{derive_seed, Purpose};

#[derive(Clone, Debug, PartialEq)]
pub enum InferenceError {
    Underdetermined { n: usize, d: usize },
    LengthMismatch { expected: usize, got: usize },
    Singular { min_eigenvalue: f64 },
    IllConditioned { condition: f64 },
    DimensionTooSmall { d: usize },
    InvalidAlpha { alpha: f64 },
    BSigmaTooSmall { b_sigma: usize },
    Bootstrap(BootstrapError),
    Model(ModelError),
}

impl fmt::Display for InferenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InferenceError::Underdetermined { n, d } => {
                write!(f, "OLS needs d < n, got d = {d}, n = {n}")
            }
            InferenceError::LengthMismatch { expected, got } => {
                write!(f, "vector has length {got}, expected {expected}")
            }
            InferenceError::Singular { min_eigenvalue } => {
                write!(
                    f,
                    "design Gram matrix is singular (min eigenvalue {min_eigenvalue})"
                )
            }
            InferenceError::IllConditioned { condition } => {
                write!(f, "design Gram matrix condition {condition} exceeds 1e12")
            }
            InferenceError::DimensionTooSmall { d } => {
                write!(f, "combined statistic needs d >= 2, got {d}")
            }
            InferenceError::InvalidAlpha { alpha } => {
                write!(f, "alpha must lie strictly between 0 and 1, got {alpha}")
            }
            InferenceError::BSigmaTooSmall { b_sigma } => {
                write!(f, "sigma estimation needs >= 50 draws, got {b_sigma}")
            }
            InferenceError::Bootstrap(e) => write!(f, "bootstrap error: {e}"),
            InferenceError::Model(e) => write!(f, "model error: {e}"),
        }
    }
}

impl From<BootstrapError> for InferenceError {
    fn from(e: BootstrapError) -> Self {
        InferenceError::Bootstrap(e)
    }
}

impl From<ModelError> for InferenceError {
    fn from(e: ModelError) -> Self {
        InferenceError::Model(e)
    }
}

/// Ordinary least squares fit with the pieces the tests reuse.
#[derive(Clone, Debug, PartialEq)]
pub struct OlsFit {
    pub beta_hat: Vec<f64>,
    pub residuals: Vec<f64>,
    /// (XᵀX/n)^{-1}, row-major d×d.
    pub gram_inv: Vec<f64>,
    /// Eigenvalue ratio of XᵀX/n.
    pub condition_estimate: f64,
    pub n: usize,
    pub d: usize,
}

/// Which of the two tests produced a [`TestOutcome`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestKind {
    Combined,
    Threshold,
}

impl TestKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::Combined => "combined",
            TestKind::Threshold => "threshold",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestMeta {
    pub l: usize,
    pub b: usize,
    pub seed: u64,
    pub kind: TestKind,
}

/// Full record of one hypothesis test.
#[derive(Clone, Debug, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    /// Bootstrap statistics, sorted ascending.
    pub boot_draws: Vec<f64>,
    /// ⌈(1−α)B⌉-th order statistic of the draws.
    pub critical_value: f64,
    /// Add-one p-value (1 + #{T^B ≥ T})/(B + 1), in (0, 1].
    pub p_value: f64,
    pub alpha: f64,
    /// Always equals `p_value <= alpha`.
    pub reject: bool,
    pub meta: TestMeta,
}

/// Threshold levels for the soft-threshold test: λ_j = σ̂_j·√(2·log n / n).
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdConfig {
    pub lambda: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    pub b_sigma: usize,
}

/// Default draw count for σ̂ estimation.
pub const DEFAULT_B_SIGMA: usize = 200;

/// Least squares via the spectral inverse of the Gram matrix XᵀX/n (symmetric
/// positive definite by the conditioning check).
pub fn ols_fit(x: &TimeSeriesMatrix, y: &[f64]) -> Result<OlsFit, InferenceError> {
    let (n, d) = (x.n(), x.d());
    if d >= n {
        return Err(InferenceError::Underdetermined { n, d });
    }
    if y.len() != n {
        return Err(InferenceError::LengthMismatch {
            expected: n,
            got: y.len(),
        });
    }
    // Gram matrix G = XᵀX/n and moment vector XᵀY/n
    let mut gram = vec![0.0; d * d];
    let mut xty = vec![0.0; d];
    for i in 0..n {
        let row = x.row(i);
        let yi = y[i];
        for a in 0..d {
            let ra = row[a];
            xty[a] += ra * yi;
            for b in a..d {
                gram[a * d + b] += ra * row[b];
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    for a in 0..d {
        xty[a] *= inv_n;
        for b in a..d {
            let v = gram[a * d + b] * inv_n;
            gram[a * d + b] = v;
            gram[b * d + a] = v;
        }
    }
    let (vals, vecs) = linalg::sym_eigen(&gram, d);
    let mut min_eig = f64::INFINITY;
    let mut max_eig = f64::NEG_INFINITY;
    for &v in vals.iter() {
        min_eig = min_eig.min(v);
        max_eig = max_eig.max(v);
    }
    if min_eig <= 0.0 {
        return Err(InferenceError::Singular {
            min_eigenvalue: min_eig,
        });
    }
    let condition = max_eig / min_eig;
    if condition > 1e12 {
        return Err(InferenceError::IllConditioned { condition });
    }
    let gram_inv = linalg::rebuild_symmetric(&vals, &vecs, |l| 1.0 / l);
    let mut beta_hat = vec![0.0; d];
    linalg::matvec(&gram_inv, d, &xty, &mut beta_hat);
    let mut residuals = Vec::with_capacity(n);
    for i in 0..n {
        let row = x.row(i);
        let mut fitted = 0.0;
        for j in 0..d {
            fitted += row[j] * beta_hat[j];
        }
        residuals.push(y[i] - fitted);
    }
    Ok(OlsFit {
        beta_hat,
        residuals,
        gram_inv,
        condition_estimate: condition,
        n,
        d,
    })
}

/// Score rows ẑ_i = (XᵀX/n)^{-1} x_i ε̂_i stacked into an n×d matrix — the
/// series whose block bootstrap mimics √n(β̂ − β₀).
pub fn score_matrix(
    fit: &OlsFit,
    x: &TimeSeriesMatrix,
) -> Result<TimeSeriesMatrix, InferenceError> {
    let (n, d) = (fit.n, fit.d);
    if x.n() != n || x.d() != d {
        return Err(InferenceError::LengthMismatch {
            expected: n * d,
            got: x.n() * x.d(),
        });
    }
    let mut z = vec![0.0; n * d];
    let mut scaled = vec![0.0; d];
    let mut out = vec![0.0; d];
    for i in 0..n {
        let row = x.row(i);
        let e = fit.residuals[i];
        for j in 0..d {
            scaled[j] = row[j] * e;
        }
        linalg::matvec(&fit.gram_inv, d, &scaled, &mut out);
        z[i * d..(i + 1) * d].copy_from_slice(&out);
    }
    Ok(TimeSeriesMatrix::new(n, d, z)?)
}

/// The combined two-norm statistic
/// T = max{ |β̂−β₀|_∞·√n/√(2·log d), |β̂−β₀|₂·√(n/d) }.
pub fn combined_statistic(
    beta_hat: &[f64],
    beta0: &[f64],
    n: usize,
    d: usize,
) -> Result<f64, InferenceError> {
    if d < 2 {
        return Err(InferenceError::DimensionTooSmall { d });
    }
    if beta_hat.len() != d || beta0.len() != d {
        return Err(InferenceError::LengthMismatch {
            expected: d,
            got: if beta_hat.len() != d {
                beta_hat.len()
            } else {
                beta0.len()
            },
        });
    }
    let mut linf = 0.0f64;
    let mut l2sq = 0.0f64;
    for j in 0..d {
        let diff = beta_hat[j] - beta0[j];
        linf = linf.max(libm::fabs(diff));
        l2sq += diff * diff;
    }
    let sqrt_n = libm::sqrt(n as f64);
    let t_inf = linf * sqrt_n / libm::sqrt(2.0 * libm::log(d as f64));
    let t_two = libm::sqrt(l2sq) * libm::sqrt(n as f64 / d as f64);
    Ok(t_inf.max(t_two))
}

fn combined_boot_stat(g: &[f64], d: usize) -> f64 {
    let mut linf = 0.0f64;
    let mut l2sq = 0.0f64;
    for &v in g {
        linf = linf.max(libm::fabs(v));
        l2sq += v * v;
    }
    let t_inf = linf / libm::sqrt(2.0 * libm::log(d as f64));
    let t_two = libm::sqrt(l2sq / d as f64);
    t_inf.max(t_two)
}

/// Multiplier bootstrap statistics T^B for the combined test: block-sum
/// draws Ĝ on the score matrix, each mapped through the same max-of-norms.
/// Returned in draw order (unsorted).
pub fn combined_bootstrap(
    fit: &OlsFit,
    x: &TimeSeriesMatrix,
    l: usize,
    b: usize,
    seed: u64,
) -> Result<Vec<f64>, InferenceError> {
    if fit.d < 2 {
        return Err(InferenceError::DimensionTooSmall { d: fit.d });
    }
    let z = score_matrix(fit, x)?;
    let draws = bootstrap::bootstrap_sample(&z, l, b, seed)?;
    Ok((0..b)
        .map(|i| combined_boot_stat(draws.row(i), fit.d))
        .collect())
}

/// Soft threshold δ_λ(x) = sgn(x)·(|x|−λ) when |x| ≥ λ, else 0 (λ ≥ 0).
/// 1-Lipschitz in x.
pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    debug_assert!(lambda >= 0.0, "negative threshold");
    if libm::fabs(x) >= lambda {
        libm::copysign(libm::fabs(x) - lambda, x)
    } else {
        0.0
    }
}

/// Estimates σ̂_j = sd(β̂_j) by an independent batch of bootstrap draws on a
/// stream derived from `seed` (disjoint from the test's multiplier stream),
/// then sets λ_j = σ̂_j·√(2·log n / n).
pub fn estimate_sigma_hat(
    fit: &OlsFit,
    x: &TimeSeriesMatrix,
    l: usize,
    b_sigma: usize,
    seed: u64,
) -> Result<ThresholdConfig, InferenceError> {
    if b_sigma < 50 {
        return Err(InferenceError::BSigmaTooSmall { b_sigma });
    }
    let z = score_matrix(fit, x)?;
    let sigma_seed = derive_seed(seed, Purpose::SigmaSeed, 0);
    let draws = bootstrap::bootstrap_sample(&z, l, b_sigma, sigma_seed)?;
    let (n, d) = (fit.n, fit.d);
    let inv_sqrt_n = 1.0 / libm::sqrt(n as f64);
    let mut sigma_hat = Vec::with_capacity(d);
    for j in 0..d {
        // column of Ĝ/√n, which estimates the sampling noise of β̂_j
        let mut mean = 0.0;
        for i in 0..b_sigma {
            mean += draws.row(i)[j] * inv_sqrt_n;
        }
        mean /= b_sigma as f64;
        let mut ss = 0.0;
        for i in 0..b_sigma {
            let c = draws.row(i)[j] * inv_sqrt_n - mean;
            ss += c * c;
        }
        sigma_hat.push(libm::sqrt(ss / (b_sigma - 1) as f64));
    }
    let rate = libm::sqrt(2.0 * libm::log(n as f64) / n as f64);
    let lambda = sigma_hat.iter().map(|s| s * rate).collect();
    Ok(ThresholdConfig {
        lambda,
        sigma_hat,
        b_sigma,
    })
}

/// Resolves an explicit or automatic window: `None` runs minimal-volatility
/// selection on the default n^{1/3} grid over the score matrix.
fn resolve_block_size(z: &TimeSeriesMatrix, l: Option<usize>) -> Result<usize, InferenceError> {
    match l {
        Some(l) => Ok(l),
        None => Ok(bootstrap::select_block_size(
            z,
            &bootstrap::default_grid(z.n()),
        )?),
    }
}

fn finish_outcome(statistic: f64, mut boot: Vec<f64>, alpha: f64, meta: TestMeta) -> TestOutcome {
    boot.sort_unstable_by(f64::total_cmp);
    let b = boot.len();
    let exceed = boot.iter().filter(|&&t| t >= statistic).count();
    let p_value = (1.0 + exceed as f64) / (b as f64 + 1.0);
    let rank = libm::ceil((1.0 - alpha) * b as f64) as usize;
    let critical_value = boot[rank.clamp(1, b) - 1];
    TestOutcome {
        statistic,
        boot_draws: boot,
        critical_value,
        p_value,
        alpha,
        reject: p_value <= alpha,
        meta,
    }
}

fn check_alpha(alpha: f64) -> Result<(), InferenceError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(InferenceError::InvalidAlpha { alpha });
    }
    Ok(())
}

/// Runs the combined L²/L∞ test of H₀: β = β₀ at level `alpha`.
/// `l = None` selects the window automatically on the score matrix.
pub fn run_combined_test(
    x: &TimeSeriesMatrix,
    y: &[f64],
    beta0: &[f64],
    alpha: f64,
    l: Option<usize>,
    b: usize,
    seed: u64,
) -> Result<TestOutcome, InferenceError> {
    check_alpha(alpha)?;
    let fit = ols_fit(x, y)?;
    if fit.d < 2 {
        return Err(InferenceError::DimensionTooSmall { d: fit.d });
    }
    let statistic = combined_statistic(&fit.beta_hat, beta0, fit.n, fit.d)?;
    let z = score_matrix(&fit, x)?;
    let l = resolve_block_size(&z, l)?;
    let draws = bootstrap::bootstrap_sample(&z, l, b, seed)?;
    let boot: Vec<f64> = (0..b)
        .map(|i| combined_boot_stat(draws.row(i), fit.d))
        .collect();
    let meta = TestMeta {
        l,
        b,
        seed,
        kind: TestKind::Combined,
    };
    Ok(finish_outcome(statistic, boot, alpha, meta))
}

/// Runs the soft-threshold max test of H₀: β = β₀ at level `alpha`.
/// σ̂ comes from `b_sigma` draws on an independent derived stream;
/// `l = None` selects the window automatically on the score matrix.
// One parameter per degree of freedom of the test; bundling them into a
// struct would just rename the argument list.
#[allow(clippy::too_many_arguments)]
pub fn run_threshold_test(
    x: &TimeSeriesMatrix,
    y: &[f64],
    beta0: &[f64],
    alpha: f64,
    l: Option<usize>,
    b: usize,
    b_sigma: usize,
    seed: u64,
) -> Result<TestOutcome, InferenceError> {
    check_alpha(alpha)?;
    let fit = ols_fit(x, y)?;
    let d = fit.d;
    if beta0.len() != d {
        return Err(InferenceError::LengthMismatch {
            expected: d,
            got: beta0.len(),
        });
    }
    let z = score_matrix(&fit, x)?;
    let l = resolve_block_size(&z, l)?;
    let config = estimate_sigma_hat(&fit, x, l, b_sigma, seed)?;
    let sqrt_n = libm::sqrt(fit.n as f64);
    let mut stat = 0.0f64;
    for j in 0..d {
        let dev = soft_threshold(fit.beta_hat[j], config.lambda[j]) - beta0[j];
        stat = stat.max(libm::fabs(dev));
    }
    let statistic = sqrt_n * stat;
    let draws = bootstrap::bootstrap_sample(&z, l, b, seed)?;
    let mut boot = Vec::with_capacity(b);
    for i in 0..b {
        let g = draws.row(i);
        let mut tb = 0.0f64;
        for j in 0..d {
            let shifted = beta0[j] + g[j] / sqrt_n;
            let dev = soft_threshold(shifted, config.lambda[j]) - beta0[j];
            tb = tb.max(libm::fabs(dev));
        }
        boot.push(sqrt_n * tb);
    }
    let meta = TestMeta {
        l,
        b,
        seed,
        kind: TestKind::Threshold,
    };
    Ok(finish_outcome(statistic, boot, alpha, meta))
}
