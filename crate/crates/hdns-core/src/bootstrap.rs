//! Block sums, multiplier bootstrap draws, conditional covariance, the
//! covariance-mismatch diagnostics, and a minimal-volatility block-size
//! selector.
//!
//! The bootstrap approximates the law of the normalized partial sum
//! `X_n/√n = Σ_i x_i/√n` of a mean-zero, possibly non-stationary series by
//!
//! ```text
//! ψ_{i,L} = (x_i + … + x_{i+L−1})/√L           (block sums, i = 1..n−L+1)
//! Ĝ       = Σ_i B_i ψ_{i,L} / √(n−L+1)         (B_i i.i.d. standard normal)
//! ```
//!
//! Conditionally on the data, Ĝ is exactly Gaussian with covariance
//! `Σ_boot = Σ_i ψ_i ψ_iᵀ/(n−L+1)`; the window `L` trades bias (too-small L
//! misses serial dependence) against variance (too-large L leaves too few
//! blocks). The mismatch between `Σ_boot` and a target covariance is reported
//! in Frobenius norm (`delta_frobenius`) and entrywise max norm (`delta_max`),
//! which shrink at rate `d·(√(L/n) + 1/L)` for weakly dependent inputs.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg;
use crate::models::TimeSeriesMatrix;
use crate::rng::{Purpose, Stream};

#[derive(Clone, Debug, PartialEq)]
pub enum BootstrapError {
    WindowOutOfRange { l: usize, n: usize },
    MultiplierLengthMismatch { expected: usize, got: usize },
    DimensionMismatch { expected: usize, got: usize },
    NotSymmetric { asymmetry: f64 },
    DrawCountZero,
    EmptyCandidates,
}

impl fmt::Display for BootstrapError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BootstrapError::WindowOutOfRange { l, n } => {
                write!(f, "window L = {l} outside 1..={n}")
            }
            BootstrapError::MultiplierLengthMismatch { expected, got } => {
                write!(f, "multiplier vector has length {got}, expected {expected}")
            }
            BootstrapError::DimensionMismatch { expected, got } => {
                write!(f, "matrix has {got} entries, expected {expected}")
            }
            BootstrapError::NotSymmetric { asymmetry } => {
                write!(f, "matrix asymmetry {asymmetry} exceeds tolerance 1e-8")
            }
            BootstrapError::DrawCountZero => write!(f, "draw count B must be >= 1"),
            BootstrapError::EmptyCandidates => write!(f, "candidate window list is empty"),
        }
    }
}

/// Rolling block sums ψ_{i,L}, stored row-major with n−L+1 rows.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSums {
    psi: Vec<f64>,
    pub l: usize,
    pub n: usize,
    pub d: usize,
}

impl BlockSums {
    pub fn rows(&self) -> usize {
        self.n - self.l + 1
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.psi[i * self.d..(i + 1) * self.d]
    }

    pub fn data(&self) -> &[f64] {
        &self.psi
    }
}

/// Multiplier bootstrap draws, row b = Ĝ⁽ᵇ⁾ = τ⁽ᵇ⁾/√(n−L+1).
#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapDraws {
    draws: Vec<f64>,
    pub l: usize,
    pub b: usize,
    pub d: usize,
    pub seed: u64,
    /// Rows carry the 1/√(n−L+1) normalization (always true here).
    pub scaled: bool,
}

impl BootstrapDraws {
    pub fn row(&self, b: usize) -> &[f64] {
        &self.draws[b * self.d..(b + 1) * self.d]
    }

    pub fn data(&self) -> &[f64] {
        &self.draws
    }
}

/// Covariance mismatch between a target and the bootstrap's conditional
/// covariance, in Frobenius and entrywise max norms.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceDiagnostics {
    pub delta_frobenius: f64,
    pub delta_max: f64,
    pub sigma_target: Vec<f64>,
    pub sigma_boot: Vec<f64>,
    pub d: usize,
}

/// Exact window sum with compensated (Neumaier) accumulation per coordinate.
fn window_sum_compensated(x: &TimeSeriesMatrix, start: usize, l: usize, out: &mut [f64]) {
    let d = x.d();
    let mut comp = vec![0.0; d];
    out.iter_mut().for_each(|s| *s = 0.0);
    for i in start..start + l {
        let row = x.row(i);
        for j in 0..d {
            let s = out[j];
            let v = row[j];
            let t = s + v;
            comp[j] += if s.abs() >= v.abs() {
                (s - t) + v
            } else {
                (v - t) + s
            };
            out[j] = t;
        }
    }
    for j in 0..d {
        out[j] += comp[j];
    }
}

/// Steps between full recomputations of the rolling sum, bounding the drift
/// of the add/subtract updates.
const RESYNC_EVERY: usize = 1024;

/// Computes all block sums ψ_{i,L} = (x_i + … + x_{i+L−1})/√L.
pub fn block_sums(x: &TimeSeriesMatrix, l: usize) -> Result<BlockSums, BootstrapError> {
    let (n, d) = (x.n(), x.d());
    if l < 1 || l > n {
        return Err(BootstrapError::WindowOutOfRange { l, n });
    }
    let rows = n - l + 1;
    let inv_sqrt_l = 1.0 / libm::sqrt(l as f64);
    let mut psi = Vec::with_capacity(rows * d);
    let mut sum = vec![0.0; d];
    window_sum_compensated(x, 0, l, &mut sum);
    for j in 0..d {
        psi.push(sum[j] * inv_sqrt_l);
    }
    for i in 1..rows {
        if i % RESYNC_EVERY == 0 {
            window_sum_compensated(x, i, l, &mut sum);
        } else {
            let leaving = x.row(i - 1);
            let entering = x.row(i + l - 1);
            for j in 0..d {
                sum[j] += entering[j] - leaving[j];
            }
        }
        for j in 0..d {
            psi.push(sum[j] * inv_sqrt_l);
        }
    }
    Ok(BlockSums { psi, l, n, d })
}

/// One unscaled multiplier combination τ = Σ_i m_i ψ_i.
pub fn multiplier_draw(psi: &BlockSums, multipliers: &[f64]) -> Result<Vec<f64>, BootstrapError> {
    let rows = psi.rows();
    if multipliers.len() != rows {
        return Err(BootstrapError::MultiplierLengthMismatch {
            expected: rows,
            got: multipliers.len(),
        });
    }
    let d = psi.d;
    let mut out = vec![0.0; d];
    for (i, &m) in multipliers.iter().enumerate() {
        let row = psi.row(i);
        for j in 0..d {
            out[j] += m * row[j];
        }
    }
    Ok(out)
}

/// Draws B independent multiplier bootstrap replicates Ĝ⁽ᵇ⁾, each scaled by
/// 1/√(n−L+1). Draw b uses the dedicated stream (seed, Multiplier, b, 0), so
/// results are deterministic in (X, L, B, seed) and independent of scheduling.
pub fn bootstrap_sample(
    x: &TimeSeriesMatrix,
    l: usize,
    b: usize,
    seed: u64,
) -> Result<BootstrapDraws, BootstrapError> {
    if b == 0 {
        return Err(BootstrapError::DrawCountZero);
    }
    let psi = block_sums(x, l)?;
    let rows = psi.rows();
    let d = psi.d;
    let scale = 1.0 / libm::sqrt(rows as f64);
    let mut draws = Vec::with_capacity(b * d);
    let mut acc = vec![0.0; d];
    for draw_idx in 0..b {
        let mut stream = Stream::new(seed, Purpose::Multiplier, draw_idx as i64, 0);
        acc.iter_mut().for_each(|s| *s = 0.0);
        for i in 0..rows {
            let m = stream.next_gaussian();
            let row = psi.row(i);
            for j in 0..d {
                acc[j] += m * row[j];
            }
        }
        for j in 0..d {
            draws.push(acc[j] * scale);
        }
    }
    Ok(BootstrapDraws {
        draws,
        l,
        b,
        d,
        seed,
        scaled: true,
    })
}

/// Conditional covariance of the scaled draw: Σ_i ψ_i ψ_iᵀ/(n−L+1). Exact —
/// given the data, Ĝ is Gaussian with precisely this covariance.
pub fn conditional_covariance(psi: &BlockSums) -> Vec<f64> {
    let rows = psi.rows();
    let d = psi.d;
    let mut cov = vec![0.0; d * d];
    for i in 0..rows {
        let row = psi.row(i);
        for a in 0..d {
            let ra = row[a];
            for b in a..d {
                cov[a * d + b] += ra * row[b];
            }
        }
    }
    let inv = 1.0 / rows as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[a * d + b] * inv;
            cov[a * d + b] = v;
            cov[b * d + a] = v;
        }
    }
    cov
}

/// Frobenius / max-norm mismatch between a target covariance and the
/// bootstrap conditional covariance. Both inputs must be d×d and symmetric
/// within 1e−8.
pub fn delta_diagnostics(
    sigma_target: &[f64],
    sigma_boot: &[f64],
    d: usize,
) -> Result<CovarianceDiagnostics, BootstrapError> {
    if sigma_target.len() != d * d {
        return Err(BootstrapError::DimensionMismatch {
            expected: d * d,
            got: sigma_target.len(),
        });
    }
    if sigma_boot.len() != d * d {
        return Err(BootstrapError::DimensionMismatch {
            expected: d * d,
            got: sigma_boot.len(),
        });
    }
    for m in [sigma_target, sigma_boot] {
        let asym = linalg::asymmetry(m, d);
        if !(asym <= 1e-8) {
            return Err(BootstrapError::NotSymmetric { asymmetry: asym });
        }
    }
    Ok(CovarianceDiagnostics {
        delta_frobenius: linalg::frobenius_diff(sigma_target, sigma_boot),
        delta_max: linalg::max_abs_diff(sigma_target, sigma_boot),
        sigma_target: sigma_target.to_vec(),
        sigma_boot: sigma_boot.to_vec(),
        d,
    })
}

/// Default candidate grid {⌈c·n^{1/3}⌉ : c ∈ {0.5, 0.75, 1, 1.5, 2, 3}},
/// clamped to [1, n], deduplicated, ascending.
pub fn default_grid(n: usize) -> Vec<usize> {
    let root = libm::cbrt(n as f64);
    let mut grid: Vec<usize> = [0.5, 0.75, 1.0, 1.5, 2.0, 3.0]
        .iter()
        .map(|c| libm::ceil(c * root) as usize)
        .map(|l| l.clamp(1, n))
        .collect();
    grid.sort_unstable();
    grid.dedup();
    grid
}

/// Minimal-volatility block-size selection: for each candidate (after
/// sorting/deduplication) compute the conditional covariance, score each by
/// the mean Frobenius distance to its grid neighbors, and return the
/// lowest-scoring window, ties broken toward the smaller one.
pub fn select_block_size(
    x: &TimeSeriesMatrix,
    candidates: &[usize],
) -> Result<usize, BootstrapError> {
    if candidates.is_empty() {
        return Err(BootstrapError::EmptyCandidates);
    }
    let mut grid = candidates.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let mut covs = Vec::with_capacity(grid.len());
    for &l in &grid {
        let psi = block_sums(x, l)?;
        covs.push(conditional_covariance(&psi));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let mut best = grid[0];
    let mut best_score = f64::INFINITY;
    for j in 0..grid.len() {
        let mut score = 0.0;
        let mut neighbors = 0.0;
        if j > 0 {
            score += linalg::frobenius_diff(&covs[j], &covs[j - 1]);
            neighbors += 1.0;
        }
        if j + 1 < grid.len() {
            score += linalg::frobenius_diff(&covs[j], &covs[j + 1]);
            neighbors += 1.0;
        }
        score /= neighbors;
        if score < best_score {
            best_score = score;
            best = grid[j];
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{simulate_model, ModelId, ModelSpec};

    fn series(values: &[f64]) -> TimeSeriesMatrix {
        TimeSeriesMatrix::new(values.len(), 1, values.to_vec()).unwrap()
    }

    #[test]
    fn block_sums_match_direct_arithmetic() {
        let x = series(&[1.0, 2.0, 3.0]);
        let psi = block_sums(&x, 2).unwrap();
        let s2 = libm::sqrt(2.0);
        assert!((psi.row(0)[0] - 3.0 / s2).abs() < 1e-15);
        assert!((psi.row(1)[0] - 5.0 / s2).abs() < 1e-15);

        // L = 1 reproduces the series; L = n gives the scaled column sum
        let id = block_sums(&x, 1).unwrap();
        assert_eq!(id.data(), x.data());
        let full = block_sums(&x, 3).unwrap();
        assert_eq!(full.rows(), 1);
        assert!((full.row(0)[0] - 6.0 / libm::sqrt(3.0)).abs() < 1e-15);
    }

    #[test]
    fn block_sums_agree_with_direct_summation_on_long_input() {
        // crosses the resync boundary; incremental and direct must agree
        let spec = ModelSpec::new(ModelId::M1, 2100, 2, 8);
        let x = simulate_model(&spec).unwrap();
        let l = 5;
        let psi = block_sums(&x, l).unwrap();
        for i in (0..psi.rows()).step_by(97) {
            for j in 0..2 {
                let direct: f64 =
                    (i..i + l).map(|t| x.get(t, j)).sum::<f64>() / libm::sqrt(l as f64);
                assert!((psi.row(i)[j] - direct).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn multiplier_draw_examples() {
        let x = series(&[1.0, 2.0, 3.0]);
        let psi = block_sums(&x, 2).unwrap();
        assert_eq!(multiplier_draw(&psi, &[0.0, 0.0]).unwrap(), vec![0.0]);
        let e1 = multiplier_draw(&psi, &[1.0, 0.0]).unwrap();
        assert_eq!(e1[0], psi.row(0)[0]);
        let diff = multiplier_draw(&psi, &[1.0, -1.0]).unwrap();
        assert!((diff[0] - (-libm::sqrt(2.0))).abs() < 1e-15);
        assert!(matches!(
            multiplier_draw(&psi, &[1.0]),
            Err(BootstrapError::MultiplierLengthMismatch { .. })
        ));
    }

    #[test]
    fn conditional_covariance_examples() {
        let zeros = TimeSeriesMatrix::new(4, 2, vec![0.0; 8]).unwrap();
        let psi = block_sums(&zeros, 2).unwrap();
        assert_eq!(conditional_covariance(&psi), vec![0.0; 4]);

        let x = series(&[1.0, 2.0, 3.0]);
        let l1 = block_sums(&x, 1).unwrap();
        let c = conditional_covariance(&l1);
        assert!((c[0] - (1.0 + 4.0 + 9.0) / 3.0).abs() < 1e-15);

        let l2 = block_sums(&x, 2).unwrap();
        let c2 = conditional_covariance(&l2);
        assert!((c2[0] - 8.5).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_draws_are_deterministic_and_zero_on_zero_input() {
        let zeros = TimeSeriesMatrix::new(10, 2, vec![0.0; 20]).unwrap();
        let draws = bootstrap_sample(&zeros, 3, 5, 77).unwrap();
        assert!(draws.data().iter().all(|&v| v == 0.0));

        let spec = ModelSpec::new(ModelId::M1, 60, 2, 5);
        let x = simulate_model(&spec).unwrap();
        let a = bootstrap_sample(&x, 4, 7, 123).unwrap();
        let b = bootstrap_sample(&x, 4, 7, 123).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_sample(&x, 4, 7, 124).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_draw_matches_multiplier_draw_with_same_stream() {
        let spec = ModelSpec::new(ModelId::M2, 40, 3, 9);
        let x = simulate_model(&spec).unwrap();
        let l = 5;
        let draws = bootstrap_sample(&x, l, 1, 31).unwrap();
        let psi = block_sums(&x, l).unwrap();
        let mut stream = Stream::new(31, Purpose::Multiplier, 0, 0);
        let m: Vec<f64> = (0..psi.rows()).map(|_| stream.next_gaussian()).collect();
        let tau = multiplier_draw(&psi, &m).unwrap();
        let scale = 1.0 / libm::sqrt(psi.rows() as f64);
        for j in 0..3 {
            assert!((draws.row(0)[j] - tau[j] * scale).abs() < 1e-14);
        }
    }

    #[test]
    fn delta_diagnostics_examples() {
        let eye = vec![1.0, 0.0, 0.0, 1.0];
        let diag = delta_diagnostics(&eye, &eye, 2).unwrap();
        assert_eq!((diag.delta_frobenius, diag.delta_max), (0.0, 0.0));

        let shifted = vec![4.0, 0.0, 0.0, 5.0];
        let diag = delta_diagnostics(&eye, &shifted, 2).unwrap();
        assert!((diag.delta_frobenius - 5.0).abs() < 1e-15);
        assert!((diag.delta_max - 4.0).abs() < 1e-15);

        let off = vec![1.0, 2.0, 2.0, 1.0];
        let diag = delta_diagnostics(&eye, &off, 2).unwrap();
        assert!((diag.delta_frobenius - 2.0 * libm::sqrt(2.0)).abs() < 1e-15);
        assert!((diag.delta_max - 2.0).abs() < 1e-15);
        assert!(diag.delta_max <= diag.delta_frobenius);

        let asym = vec![1.0, 0.5, 0.0, 1.0];
        assert!(matches!(
            delta_diagnostics(&eye, &asym, 2),
            Err(BootstrapError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn default_grid_for_n_500() {
        assert_eq!(default_grid(500), vec![4, 6, 8, 12, 16, 24]);
    }

    #[test]
    fn select_block_size_single_candidate_and_errors() {
        let spec = ModelSpec::new(ModelId::M1, 50, 1, 4);
        let x = simulate_model(&spec).unwrap();
        assert_eq!(select_block_size(&x, &[7]).unwrap(), 7);
        assert!(matches!(
            select_block_size(&x, &[]),
            Err(BootstrapError::EmptyCandidates)
        ));
        assert!(matches!(
            block_sums(&x, 51),
            Err(BootstrapError::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn scaling_equivariance() {
        let spec = ModelSpec::new(ModelId::M3, 80, 2, 6);
        let x = simulate_model(&spec).unwrap();
        let scaled_data: Vec<f64> = x.data().iter().map(|v| 2.5 * v).collect();
        let cx = TimeSeriesMatrix::new(80, 2, scaled_data).unwrap();
        let a = bootstrap_sample(&x, 6, 20, 55).unwrap();
        let b = bootstrap_sample(&cx, 6, 20, 55).unwrap();
        for (u, v) in a.data().iter().zip(b.data()) {
            let rel = (v - 2.5 * u).abs() / (1e-300 + (2.5 * u).abs().max(1e-12));
            assert!(rel <= 1e-12, "scaling equivariance violated: {u} vs {v}");
        }
    }
}
