//! Gaussian comparison toolkit: SPD square roots, shared-noise couplings,
//! closed-form 2-Wasserstein distance, total-variation and coupling bounds,
//! an operator square-root perturbation check, and empirical one-dimensional
//! distance oracles.
//!
//! The centerpiece identity: for centered Gaussians with covariances Σ and
//! Σ̂, the coupling `X = Σ^{1/2}Z`, `Y = Σ̂^{1/2}Z` (same `Z ~ N(0, I)`)
//! satisfies `E|X−Y|² = tr((Σ^{1/2} − Σ̂^{1/2})²)`, which the square-root
//! perturbation inequality bounds by `λ_*^{-1}|Σ − Σ̂|_F²` whenever both
//! covariances have smallest eigenvalue ≥ λ_*. The symmetric (eigendecomposition)
//! square root is essential here — a Cholesky factor would break the
//! Frobenius identity.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg;
use crate::rng::{Purpose, Stream};

const SYMMETRY_TOL: f64 = 1e-8;
/// Eigenvalues below this are a hard error at SPD construction.
const EIG_HARD_FLOOR: f64 = -1e-10;
/// Eigenvalues in (EIG_HARD_FLOOR, EIG_CLIP) are clipped up to EIG_CLIP.
const EIG_CLIP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum GaussianError {
    DimensionMismatch { expected: usize, got: usize },
    NotSymmetric { asymmetry: f64 },
    NotPositiveDefinite { min_eigenvalue: f64 },
    NotFinite,
    LambdaStarInvalid { lambda_star: f64 },
    SampleSizeMismatch { a: usize, b: usize },
    SampleTooSmall { m: usize },
    EmptySample,
}

impl fmt::Display for GaussianError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GaussianError::DimensionMismatch { expected, got } => {
                write!(f, "matrix has {got} entries, expected {expected}")
            }
            GaussianError::NotSymmetric { asymmetry } => {
                write!(f, "matrix asymmetry {asymmetry} exceeds tolerance 1e-8")
            }
            GaussianError::NotPositiveDefinite { min_eigenvalue } => {
                write!(
                    f,
                    "matrix is not positive definite (min eigenvalue {min_eigenvalue})"
                )
            }
            GaussianError::NotFinite => write!(f, "input contains a non-finite entry"),
            GaussianError::LambdaStarInvalid { lambda_star } => {
                write!(
                    f,
                    "lambda_star {lambda_star} is not a valid lower eigenvalue bound"
                )
            }
            GaussianError::SampleSizeMismatch { a, b } => {
                write!(f, "sample sizes differ: {a} vs {b}")
            }
            GaussianError::SampleTooSmall { m } => {
                write!(f, "need at least 2 samples, got {m}")
            }
            GaussianError::EmptySample => write!(f, "samples must be non-empty"),
        }
    }
}

/// Symmetric positive-definite matrix, validated at construction:
/// symmetric within 1e−8 (then symmetrized by averaging), eigenvalues
/// above −1e−10, with near-zero eigenvalues clipped up to 1e−12.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix {
    entries: Vec<f64>,
    d: usize,
    clipped: bool,
}

impl SpdMatrix {
    pub fn new(entries: Vec<f64>, d: usize) -> Result<Self, GaussianError> {
        if entries.len() != d * d {
            return Err(GaussianError::DimensionMismatch {
                expected: d * d,
                got: entries.len(),
            });
        }
        if !linalg::all_finite(&entries) {
            return Err(GaussianError::NotFinite);
        }
        let asym = linalg::asymmetry(&entries, d);
        if !(asym <= SYMMETRY_TOL) {
            return Err(GaussianError::NotSymmetric { asymmetry: asym });
        }
        let mut sym = entries;
        linalg::symmetrize(&mut sym, d);
        let (vals, vecs) = linalg::sym_eigen(&sym, d);
        let min_eig = vals.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if min_eig < EIG_HARD_FLOOR {
            return Err(GaussianError::NotPositiveDefinite {
                min_eigenvalue: min_eig,
            });
        }
        if min_eig < EIG_CLIP {
            // rebuild with the tiny eigenvalues floored so downstream roots
            // and inverses are well-defined
            let rebuilt = linalg::rebuild_symmetric(&vals, &vecs, |l| l.max(EIG_CLIP));
            return Ok(SpdMatrix {
                entries: rebuilt,
                d,
                clipped: true,
            });
        }
        Ok(SpdMatrix {
            entries: sym,
            d,
            clipped: false,
        })
    }

    pub fn identity(d: usize) -> Self {
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            entries[i * d + i] = 1.0;
        }
        SpdMatrix {
            entries,
            d,
            clipped: false,
        }
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self, GaussianError> {
        let d = diag.len();
        let mut entries = vec![0.0; d * d];
        for (i, &v) in diag.iter().enumerate() {
            entries[i * d + i] = v;
        }
        SpdMatrix::new(entries, d)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    /// True when construction had to floor a near-zero eigenvalue; callers
    /// with an IO channel should surface this as a warning.
    pub fn clipped(&self) -> bool {
        self.clipped
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_eigenvalue(&self.entries, self.d)
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.entries, self.d)
    }

    fn check_same_dim(&self, other: &SpdMatrix) -> Result<(), GaussianError> {
        if self.d != other.d {
            return Err(GaussianError::DimensionMismatch {
                expected: self.d * self.d,
                got: other.d * other.d,
            });
        }
        Ok(())
    }
}

/// A pair of Gaussian vectors built on one shared standard normal draw.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledPair {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z_source: Vec<f64>,
}

/// Symmetric square root via eigendecomposition: S = QΛQᵀ ↦ QΛ^{1/2}Qᵀ.
pub fn spd_sqrt(s: &SpdMatrix) -> Result<SpdMatrix, GaussianError> {
    let (vals, vecs) = linalg::sym_eigen(s.entries(), s.d);
    let min_eig = vals.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min_eig < EIG_HARD_FLOOR {
        return Err(GaussianError::NotPositiveDefinite {
            min_eigenvalue: min_eig,
        });
    }
    let root = linalg::rebuild_symmetric(&vals, &vecs, |l| libm::sqrt(l.max(EIG_CLIP)));
    SpdMatrix::new(root, s.d)
}

/// Closed-form 2-Wasserstein distance between N(0, S1) and N(0, S2):
/// √(tr S1 + tr S2 − 2·tr (S1^{1/2} S2 S1^{1/2})^{1/2}).
pub fn gaussian_w2(s1: &SpdMatrix, s2: &SpdMatrix) -> Result<f64, GaussianError> {
    s1.check_same_dim(s2)?;
    if s1.entries == s2.entries {
        // the trace expression cancels to ~machine-eps here, and the square
        // root would amplify that to ~1e-8; the exact answer is 0
        return Ok(0.0);
    }
    let d = s1.d;
    let r1 = spd_sqrt(s1)?;
    let inner = linalg::matmul(
        &linalg::matmul(r1.entries(), s2.entries(), d),
        r1.entries(),
        d,
    );
    let mut inner_sym = inner;
    linalg::symmetrize(&mut inner_sym, d);
    let (vals, _) = linalg::sym_eigen(&inner_sym, d);
    let tr_root: f64 = vals.iter().map(|&l| libm::sqrt(l.max(0.0))).sum();
    let sq = s1.trace() + s2.trace() - 2.0 * tr_root;
    Ok(libm::sqrt(sq.max(0.0)))
}

/// Draws one shared-noise coupling: z ~ N(0, I), x = S1^{1/2}z, y = S2^{1/2}z.
/// Coordinate j of z comes from the stream (seed, CouplingNoise, 0, j); vary
/// the seed (e.g. via `derive_seed`) across draws.
pub fn coupled_gaussian_pair(
    s1: &SpdMatrix,
    s2: &SpdMatrix,
    seed: u64,
) -> Result<CoupledPair, GaussianError> {
    s1.check_same_dim(s2)?;
    let d = s1.d;
    let r1 = spd_sqrt(s1)?;
    let r2 = spd_sqrt(s2)?;
    let z: Vec<f64> = (0..d)
        .map(|j| Stream::new(seed, Purpose::CouplingNoise, 0, j as u64).next_gaussian())
        .collect();
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    linalg::matvec(r1.entries(), d, &z, &mut x);
    linalg::matvec(r2.entries(), d, &z, &mut y);
    Ok(CoupledPair { x, y, z_source: z })
}

/// The coupling distortion bound λ_*^{-1}·|S1 − S2|_F². Valid as a bound on
/// E|x−y|² when λ_* lower-bounds the spectrum of at least one input — check
/// with [`lambda_star_is_valid`] and warn otherwise.
pub fn coupling_bound(
    s1: &SpdMatrix,
    s2: &SpdMatrix,
    lambda_star: f64,
) -> Result<f64, GaussianError> {
    s1.check_same_dim(s2)?;
    if !(lambda_star > 0.0) {
        return Err(GaussianError::LambdaStarInvalid { lambda_star });
    }
    let fd = linalg::frobenius_diff(s1.entries(), s2.entries());
    Ok(fd * fd / lambda_star)
}

/// Whether λ_* actually lower-bounds the spectrum of at least one argument
/// (the hypothesis under which [`coupling_bound`] dominates E|x−y|²).
pub fn lambda_star_is_valid(s1: &SpdMatrix, s2: &SpdMatrix, lambda_star: f64) -> bool {
    lambda_star > 0.0
        && (lambda_star <= s1.min_eigenvalue() + 1e-12
            || lambda_star <= s2.min_eigenvalue() + 1e-12)
}

/// Total-variation bound between N(0, S1) and N(0, S2):
/// (3/2)·min{1, |S1^{-1/2} S2 S1^{-1/2} − I|_F}. The Frobenius norm equals
/// the root-sum-square of the eigenvalues of S1^{-1}S2 − I.
pub fn tv_bound(s1: &SpdMatrix, s2: &SpdMatrix) -> Result<f64, GaussianError> {
    s1.check_same_dim(s2)?;
    let d = s1.d;
    let (vals, vecs) = linalg::sym_eigen(s1.entries(), d);
    let min_eig = vals.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min_eig < EIG_HARD_FLOOR {
        return Err(GaussianError::NotPositiveDefinite {
            min_eigenvalue: min_eig,
        });
    }
    let r1_inv = linalg::rebuild_symmetric(&vals, &vecs, |l| 1.0 / libm::sqrt(l.max(EIG_CLIP)));
    let mut m = linalg::matmul(&linalg::matmul(&r1_inv, s2.entries(), d), &r1_inv, d);
    for i in 0..d {
        m[i * d + i] -= 1.0;
    }
    let rho = linalg::frobenius_norm(&m);
    Ok(1.5 * rho.min(1.0))
}

/// Square-root perturbation check: returns
/// (|S1^{1/2} − S2^{1/2}|_F, λ_*^{-1/2}·|S1 − S2|_F); the first is provably
/// ≤ the second whenever λ_* lower-bounds both spectra (enforced here).
pub fn vha_check(
    s1: &SpdMatrix,
    s2: &SpdMatrix,
    lambda_star: f64,
) -> Result<(f64, f64), GaussianError> {
    s1.check_same_dim(s2)?;
    if !(lambda_star > 0.0)
        || lambda_star > s1.min_eigenvalue() + 1e-10
        || lambda_star > s2.min_eigenvalue() + 1e-10
    {
        return Err(GaussianError::LambdaStarInvalid { lambda_star });
    }
    let r1 = spd_sqrt(s1)?;
    let r2 = spd_sqrt(s2)?;
    let lhs = linalg::frobenius_diff(r1.entries(), r2.entries());
    let rhs = linalg::frobenius_diff(s1.entries(), s2.entries()) / libm::sqrt(lambda_star);
    Ok((lhs, rhs))
}

/// Exact 2-Wasserstein distance between two one-dimensional empirical
/// measures of equal size: root mean squared difference of order statistics.
pub fn empirical_w2_1d(a: &[f64], b: &[f64]) -> Result<f64, GaussianError> {
    if a.len() != b.len() {
        return Err(GaussianError::SampleSizeMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(GaussianError::SampleTooSmall { m: a.len() });
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_unstable_by(f64::total_cmp);
    sb.sort_unstable_by(f64::total_cmp);
    let m = sa.len() as f64;
    let ss: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(libm::sqrt(ss / m))
}

/// Two-sample Kolmogorov distance: sup_x |F̂_a(x) − F̂_b(x)| over the merged
/// sample grid.
pub fn empirical_kolmogorov(a: &[f64], b: &[f64]) -> Result<f64, GaussianError> {
    if a.is_empty() || b.is_empty() {
        return Err(GaussianError::EmptySample);
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_unstable_by(f64::total_cmp);
    sb.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup: f64 = 0.0;
    while i < sa.len() && j < sb.len() {
        let xi = sa[i];
        let yj = sb[j];
        if xi <= yj {
            while i < sa.len() && sa[i] == xi {
                i += 1;
            }
        }
        if yj <= xi {
            while j < sb.len() && sb[j] == yj {
                j += 1;
            }
        }
        sup = sup.max(libm::fabs(i as f64 / na - j as f64 / nb));
    }
    // tail where one sample is exhausted
    sup = sup.max(libm::fabs(1.0 - j as f64 / nb));
    sup = sup.max(libm::fabs(i as f64 / na - 1.0));
    Ok(sup)
}
