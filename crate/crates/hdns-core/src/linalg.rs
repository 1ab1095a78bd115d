//! Small shared linear-algebra helpers over row-major `&[f64]` buffers.
//!
//! The public modules keep their matrices as flat row-major vectors (the
//! natural layout for the series data) and drop into `nalgebra` only where a
//! factorization is genuinely needed: symmetric eigendecompositions and
//! Cholesky solves. Everything here is `pub(crate)` plumbing.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

pub(crate) fn to_dmatrix(entries: &[f64], d: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, entries)
}

/// Symmetric eigendecomposition of a d×d row-major buffer.
/// Returns (eigenvalues, eigenvectors); column k of the matrix pairs with
/// eigenvalue k. No ordering is guaranteed.
pub(crate) fn sym_eigen(entries: &[f64], d: usize) -> (DVector<f64>, DMatrix<f64>) {
    let se = to_dmatrix(entries, d).symmetric_eigen();
    (se.eigenvalues, se.eigenvectors)
}

pub(crate) fn min_eigenvalue(entries: &[f64], d: usize) -> f64 {
    let (vals, _) = sym_eigen(entries, d);
    vals.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Rebuilds Q · diag(f(λ)) · Qᵀ as a row-major buffer, symmetrized so that
/// rounding cannot leave a stray asymmetry.
pub(crate) fn rebuild_symmetric(
    vals: &DVector<f64>,
    vecs: &DMatrix<f64>,
    f: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let d = vals.len();
    let mut scaled = vecs.clone();
    for k in 0..d {
        let fk = f(vals[k]);
        for r in 0..d {
            scaled[(r, k)] *= fk;
        }
    }
    let m = scaled * vecs.transpose();
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            out.push(0.5 * (m[(i, j)] + m[(j, i)]));
        }
    }
    out
}

/// Largest |a_ij − a_ji| over the strict upper triangle.
pub(crate) fn asymmetry(entries: &[f64], d: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in (i + 1)..d {
            worst = worst.max((entries[i * d + j] - entries[j * d + i]).abs());
        }
    }
    worst
}

/// Replaces the buffer with its symmetric part (A + Aᵀ)/2.
pub(crate) fn symmetrize(entries: &mut [f64], d: usize) {
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (entries[i * d + j] + entries[j * d + i]);
            entries[i * d + j] = avg;
            entries[j * d + i] = avg;
        }
    }
}

pub(crate) fn all_finite(entries: &[f64]) -> bool {
    entries.iter().all(|v| v.is_finite())
}

pub(crate) fn frobenius_norm(entries: &[f64]) -> f64 {
    libm::sqrt(entries.iter().map(|v| v * v).sum())
}

pub(crate) fn frobenius_diff(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let e = x - y;
        acc += e * e;
    }
    libm::sqrt(acc)
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// d×d × d-vector product for row-major buffers.
pub(crate) fn matvec(m: &[f64], d: usize, v: &[f64], out: &mut [f64]) {
    for i in 0..d {
        let row = &m[i * d..(i + 1) * d];
        let mut acc = 0.0;
        for j in 0..d {
            acc += row[j] * v[j];
        }
        out[i] = acc;
    }
}

/// Matrix product of two d×d row-major buffers.
pub(crate) fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = alloc::vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

pub(crate) fn trace(entries: &[f64], d: usize) -> f64 {
    (0..d).map(|i| entries[i * d + i]).sum()
}
